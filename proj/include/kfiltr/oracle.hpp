#pragma once

#include <functional>
#include <map>
#include <vector>

#include "kfiltr/filtration.hpp"
#include "kfiltr/invariants.hpp"

namespace kfiltr::oracle {

/// Reference implementations used only for cross-validation. These share
/// the domain types and Rational with the library but aggregate through
/// deliberately different routes (membership by Caratheodory search,
/// dimension counts by double filtering, integrals by Riemann sums), so
/// that agreement is evidence and not tautology.

namespace detail {

/// Membership of a/k in conv(vertices) via Caratheodory: some affinely
/// independent (n+1)-subset of the vertices contains the point with
/// nonnegative barycentric coordinates. No facet data involved.
inline bool in_scaled_hull(const std::vector<IVec>& verts, const IVec& a,
                           const Int& k, int n) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(n) + 1);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  if (verts.size() < idx.size()) return false;
  do {
    QMat m(static_cast<std::size_t>(n) + 1,
           QVec(static_cast<std::size_t>(n) + 1));
    QVec rhs(static_cast<std::size_t>(n) + 1);
    for (std::size_t col = 0; col < idx.size(); ++col) {
      for (int row = 0; row < n; ++row)
        m[static_cast<std::size_t>(row)][col] =
            Rat(verts[idx[col]][static_cast<std::size_t>(row)]);
      m[static_cast<std::size_t>(n)][col] = 1;
    }
    for (int row = 0; row < n; ++row)
      rhs[static_cast<std::size_t>(row)] =
          Rat(a[static_cast<std::size_t>(row)], k);
    rhs[static_cast<std::size_t>(n)] = 1;
    auto lam = solve_linear(std::move(m), std::move(rhs));
    if (!lam) continue;
    bool ok = true;
    for (const Rat& l : *lam) ok = ok && l >= 0;
    if (ok) return true;
  } while (kfiltr::detail::next_combination(idx, verts.size()));
  return false;
}

inline std::vector<IVec> enumerate_points(const LatticePolytope& p,
                                          const Int& k) {
  const int n = p.dim();
  std::vector<Int> lo(static_cast<std::size_t>(n)),
      hi(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    Int mn = p.vertices()[0][static_cast<std::size_t>(j)];
    Int mx = mn;
    for (const IVec& v : p.vertices()) {
      mn = std::min(mn, v[static_cast<std::size_t>(j)]);
      mx = std::max(mx, v[static_cast<std::size_t>(j)]);
    }
    lo[static_cast<std::size_t>(j)] = mn * k;
    hi[static_cast<std::size_t>(j)] = mx * k;
  }
  std::vector<IVec> out;
  IVec a = lo;
  while (true) {
    if (in_scaled_hull(p.vertices(), a, k, n)) out.push_back(a);
    int j = n - 1;
    while (j >= 0) {
      ++a[static_cast<std::size_t>(j)];
      if (a[static_cast<std::size_t>(j)] <= hi[static_cast<std::size_t>(j)])
        break;
      a[static_cast<std::size_t>(j)] = lo[static_cast<std::size_t>(j)];
      --j;
    }
    if (j < 0) break;
  }
  return out;
}

}  // namespace detail

/// Histogram lambda -> dim(F^lambda S_k / F^{lambda+1} S_k), by direct
/// counting of lattice points at each weight.
inline std::map<Int, Int> filtered_dims(const Filtration& f, int k) {
  std::map<Int, Int> hist;
  for (const IVec& a : detail::enumerate_points(f.domain(), k))
    hist[f.lattice_weight(k, a)] += 1;
  return hist;
}

/// sum_{lambda,mu} T(lambda,mu) dim((F^lambda S_k / F^{lambda+1} S_k)_mu),
/// with the bigraded dimensions computed by double filtering (counts of
/// weight inequalities), an independent route from the lattice-point sum.
inline Rat t_sum(const Filtration& f, const OneParamSubgroup& beta, int k,
                 const std::function<Rat(const Int&, const Int&)>& tfun) {
  const std::vector<IVec> pts = detail::enumerate_points(f.domain(), k);
  std::vector<Int> gf, gb;
  gf.reserve(pts.size());
  gb.reserve(pts.size());
  for (const IVec& a : pts) {
    gf.push_back(f.lattice_weight(k, a));
    gb.push_back(beta.form.eval(a, k));
  }
  Int lam_min = 0, lam_max = 0, mu_min = 0, mu_max = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    lam_min = std::min(lam_min, gf[i]);
    lam_max = std::max(lam_max, gf[i]);
    mu_min = std::min(mu_min, gb[i]);
    mu_max = std::max(mu_max, gb[i]);
  }
  auto filtered_count = [&](const Int& lam, const Int& mu) {
    Int c = 0;
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (gf[i] >= lam && gb[i] == mu) ++c;
    return c;
  };
  Rat total = 0;
  for (Int lam = lam_min; lam <= lam_max; ++lam)
    for (Int mu = mu_min; mu <= mu_max; ++mu) {
      const Int dim = filtered_count(lam, mu) - filtered_count(lam + 1, mu);
      if (dim != 0) total += tfun(lam, mu) * Rat(dim);
    }
  return total;
}

/// Exhaustive superadditive closure: max over all k-element multisets of
/// degree-r points, bucketed by their sum. Must reproduce the DP table of
/// approximate(F, r) at level k.
inline std::map<IVec, Int> generated_table(const Filtration& f, int r, int k,
                                           long budget = 1000000) {
  const std::vector<IVec> pts = detail::enumerate_points(f.domain(), r);
  std::vector<Int> tab;
  tab.reserve(pts.size());
  for (const IVec& a : pts) tab.push_back(f.lattice_weight(r, a));
  // Count multisets C(|pts|+k-1, k) against the budget.
  double combos = 1;
  for (int i = 0; i < k; ++i)
    combos *= static_cast<double>(pts.size() + static_cast<std::size_t>(i)) /
              static_cast<double>(i + 1);
  if (combos > static_cast<double>(budget))
    throw Error(Errc::BudgetExceeded,
                "exhaustive decomposition would exceed the budget");
  std::map<IVec, Int> out;
  const int n = f.dim();
  std::vector<std::size_t> pick(static_cast<std::size_t>(k), 0);
  while (true) {
    IVec sum(static_cast<std::size_t>(n), Int(0));
    Int val = 0;
    for (std::size_t i : pick) {
      for (int j = 0; j < n; ++j)
        sum[static_cast<std::size_t>(j)] += pts[i][static_cast<std::size_t>(j)];
      val += tab[i];
    }
    auto [it, inserted] = out.emplace(std::move(sum), val);
    if (!inserted && it->second < val) it->second = val;
    // Next non-decreasing index sequence.
    int pos = k - 1;
    while (pos >= 0 && pick[static_cast<std::size_t>(pos)] == pts.size() - 1)
      --pos;
    if (pos < 0) break;
    const std::size_t v = pick[static_cast<std::size_t>(pos)] + 1;
    for (int i = pos; i < k; ++i) pick[static_cast<std::size_t>(i)] = v;
  }
  return out;
}

struct GridIntegral {
  Rat estimate;
  Rat bound;  // certified: |estimate - exact integral| <= bound
};

/// Riemann sum of the envelope over the cells of the 1/N grid that lie
/// fully inside P. The certified bound combines the infinity-norm Lipschitz
/// constant of the forms with the uncovered volume.
inline GridIntegral grid_integral(const std::vector<RatAffine>& env,
                                  const LatticePolytope& p, int N) {
  if (N < 8) throw Error(Errc::ValidationError, "grid integral needs N >= 8");
  const int n = p.dim();
  auto value = [&env](const QVec& x) {
    Rat best = env[0].eval(x);
    for (std::size_t i = 1; i < env.size(); ++i)
      best = std::min(best, env[i].eval(x));
    return best;
  };
  // Infinity-norm Lipschitz constant: max_i |u_i|_1.
  Rat lip = 0;
  for (const RatAffine& g : env) {
    Rat l1 = 0;
    for (const Rat& u : g.u) l1 += rat_abs(u);
    lip = std::max(lip, l1);
  }
  // Crude but exact bound for |G| over P.
  Rat gmax = 0;
  for (const RatAffine& g : env)
    for (const QVec& v : p.qvertices())
      gmax = std::max(gmax, rat_abs(g.eval(v)));

  std::vector<Int> lo(static_cast<std::size_t>(n)),
      hi(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    Int mn = p.vertices()[0][static_cast<std::size_t>(j)];
    Int mx = mn;
    for (const IVec& v : p.vertices()) {
      mn = std::min(mn, v[static_cast<std::size_t>(j)]);
      mx = std::max(mx, v[static_cast<std::size_t>(j)]);
    }
    lo[static_cast<std::size_t>(j)] = mn * N;
    hi[static_cast<std::size_t>(j)] = mx * N;
  }
  Rat sum = 0;
  Int inside = 0;
  IVec a = lo;
  const Rat cell_vol = Rat(1, boost::multiprecision::pow(Int(N), n));
  while (true) {
    // Cell [a/N, (a+1)/N]^n inside P iff all corners are (P convex).
    bool in = true;
    for (Int mask = 0; in && mask < (Int(1) << n); ++mask) {
      QVec corner(static_cast<std::size_t>(n));
      for (int j = 0; j < n; ++j) {
        const bool up = bit_test(mask, static_cast<unsigned>(j));
        corner[static_cast<std::size_t>(j)] =
            Rat(a[static_cast<std::size_t>(j)] + (up ? 1 : 0), N);
      }
      in = p.contains(corner);
    }
    if (in) {
      QVec x(static_cast<std::size_t>(n));
      for (int j = 0; j < n; ++j)
        x[static_cast<std::size_t>(j)] = Rat(a[static_cast<std::size_t>(j)], N);
      sum += value(x);
      ++inside;
    }
    int j = n - 1;
    while (j >= 0) {
      ++a[static_cast<std::size_t>(j)];
      if (a[static_cast<std::size_t>(j)] < hi[static_cast<std::size_t>(j)])
        break;
      a[static_cast<std::size_t>(j)] = lo[static_cast<std::size_t>(j)];
      --j;
    }
    if (j < 0) break;
  }
  const Rat covered = Rat(inside) * cell_vol;
  const Rat bound =
      lip * p.volume() / Rat(N) + gmax * (p.volume() - covered);
  return {sum * cell_vol, bound};
}

struct ReducedScan {
  Rat min_value;
  QVec argmin;
  Rat quad_bound;  // worst-case gap to the true minimum if it lies on the box
};

/// Grid scan of ||F||^2 + 2<F,xi> + ||xi||^2 over xi = sum x_i beta_i with
/// coefficients on a step-grid in [-radius, radius]^d. Upper-bounds the
/// reduced norm; the quadratic bound controls the gap.
inline ReducedScan reduced_min(const Filtration& f, const TorusBasis& t,
                               const Rat& step, const Rat& radius) {
  const std::size_t d = t.rank_d();
  const Rat base = l2_norm2(f);
  if (d == 0) return {base, {}, Rat(0)};
  QVec v(d);
  for (std::size_t i = 0; i < d; ++i) v[i] = inner(f, t.generators()[i]);
  const QMat g = gram_matrix_on(t.generators(), f.domain_ptr());
  Rat gsum = 0;
  for (const QVec& row : g)
    for (const Rat& x : row) gsum += rat_abs(x);
  const Int steps_per_side = rat_floor(2 * radius / step);
  std::vector<Int> pick(d, Int(0));
  ReducedScan best;
  bool first = true;
  while (true) {
    QVec x(d);
    for (std::size_t i = 0; i < d; ++i) x[i] = Rat(pick[i]) * step - radius;
    Rat val = base;
    for (std::size_t i = 0; i < d; ++i) {
      val += 2 * v[i] * x[i];
      for (std::size_t j = 0; j < d; ++j) val += x[i] * g[i][j] * x[j];
    }
    if (first || val < best.min_value) {
      best.min_value = val;
      best.argmin = x;
      first = false;
    }
    std::size_t j = d;
    while (j-- > 0) {
      ++pick[j];
      if (pick[j] <= steps_per_side) break;
      pick[j] = 0;
      if (j == 0) {
        best.quad_bound = gsum * (step / 2) * (step / 2);
        return best;
      }
    }
  }
}

}  // namespace kfiltr::oracle
