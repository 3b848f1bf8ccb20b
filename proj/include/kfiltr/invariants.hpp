#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kfiltr/filtration.hpp"
#include "kfiltr/polynomial.hpp"
#include "kfiltr/polytope.hpp"

namespace kfiltr {

inline Int hilbert_count(const LatticePolytope& p, const Int& k) {
  return Int(p.lattice_points(k).size());
}

/// p-th order weight function w_F^p(k) as the exact lattice sum
/// sum_{a in P_k} g_{F,k}(a)^p.
inline Int weight_sum(const Filtration& f, int k, int p) {
  if (p != 1 && p != 2)
    throw Error(Errc::ValidationError, "weight order p must be 1 or 2");
  Int total = 0;
  for (const IVec& a : f.domain().lattice_points(k)) {
    const Int g = f.lattice_weight(k, a);
    total += (p == 1) ? g : Int(g * g);
  }
  return total;
}

/// Mixed square-weight sum sum_{a in P_k} g_{F,k}(a) * g_{b,k}(a).
inline Int mixed_square_weight(const Filtration& f,
                               const OneParamSubgroup& beta, int k) {
  Int total = 0;
  for (const IVec& a : f.domain().lattice_points(k))
    total += f.lattice_weight(k, a) * beta.form.eval(a, k);
  return total;
}

/// Fits w_F^p as a polynomial of degree n+p, with quasipolynomial fallback
/// of period <= 4. The reported period certifies (non-)goodness.
inline WeightPolynomial fit_weight_poly(const Filtration& f, int p,
                                        int window = 0) {
  const int degree = f.dim() + p;
  const int min_window = 2 * (degree + 1);
  if (window == 0) window = min_window;
  if (window < min_window)
    throw Error(Errc::ValidationError,
                "fit window must span at least 2(n+p+1) degrees");
  return fit_quasipolynomial(
      [&f, p](int k) { return weight_sum(f, k, p); }, degree, window,
      /*max_period=*/4, Errc::NotPolynomial);
}

/// Leading weight coefficients (b0, c0) = (int_P G_F, int_P G_F^2), exact.
inline std::pair<Rat, Rat> leading_coeffs(const Filtration& f) {
  const std::vector<RatAffine> env = envelope_forms(f);
  const std::vector<QVec> dom = f.domain().qvertices();
  return {integrate_envelope(dom, env), integrate_envelope_square(dom, env)};
}

/// ||F||^2 = (c0 a0 - b0^2) / a0^2, the leading-order variance of the
/// weights; zero exactly when the concave transform is constant a.e.
inline Rat l2_norm2(const Filtration& f) {
  const Rat a0 = f.domain().volume();
  const auto [b0, c0] = leading_coeffs(f);
  return (c0 * a0 - b0 * b0) / (a0 * a0);
}

/// L^2 inner product <F, beta> = (c0' a0 - b0 b0') / a0^2 with
/// c0' = int G_F G_beta and b0' = int G_beta.
inline Rat inner(const Filtration& f, const OneParamSubgroup& beta) {
  const Rat a0 = f.domain().volume();
  const std::vector<QVec> dom = f.domain().qvertices();
  const std::vector<RatAffine> env_f = envelope_forms(f);
  const std::vector<RatAffine> env_b = {beta.form.limit_form()};
  const Rat c0p = integrate_envelope_product(dom, env_f, env_b);
  const Rat b0 = integrate_envelope(dom, env_f);
  const Rat b0p = integrate_envelope(dom, env_b);
  return (c0p * a0 - b0 * b0p) / (a0 * a0);
}

/// Finite-level inner product
/// <F, beta>_r = (w2_{F,b}(r) h(r) - w_F(r) w_b(r)) / (r^2 h(r)^2).
inline Rat inner_r(const Filtration& f, const OneParamSubgroup& beta, int r) {
  if (r < 1) throw Error(Errc::ValidationError, "inner_r needs r >= 1");
  const Int h = hilbert_count(f.domain(), r);
  const Int w2 = mixed_square_weight(f, beta, r);
  const Int wf = weight_sum(f, r, 1);
  Int wb = 0;
  for (const IVec& a : f.domain().lattice_points(r))
    wb += beta.form.eval(a, r);
  return Rat(w2 * h - wf * wb) / Rat(Int(r) * Int(r) * h * h);
}

inline QMat gram_matrix_on(const std::vector<OneParamSubgroup>& gens,
                           std::shared_ptr<const LatticePolytope> p) {
  const std::size_t d = gens.size();
  QMat g(d, QVec(d));
  for (std::size_t i = 0; i < d; ++i) {
    const Filtration fi = Filtration::from_one_param(gens[i], p);
    for (std::size_t j = 0; j < d; ++j) g[i][j] = inner(fi, gens[j]);
  }
  return g;
}

inline QMat gram_matrix(const TorusBasis& t) {
  return gram_matrix_on(t.generators(), t.domain_ptr());
}

/// Solves the Gram system G x = v for the projection coefficients of F
/// onto the torus directions.
inline QVec gram_solve(QMat g, QVec v) {
  auto x = solve_linear(std::move(g), std::move(v));
  if (!x)
    throw Error(Errc::SingularGram, "torus Gram matrix is singular");
  return *x;
}

struct ReducedNorm {
  Rat value;
  QVec xi;  // coefficients of xi(F) in the given basis
};

/// Reduced norm ||F||_T^2 = ||F||^2 - 2<F,xi(F)> + ||xi(F)||^2 with xi(F)
/// solving the Gram system <xi(F), beta_j> = <F, beta_j> for all j. For an
/// orthogonal basis this is the classical sum of projections.
inline ReducedNorm reduced_norm2(const Filtration& f, const TorusBasis& t) {
  const std::size_t d = t.rank_d();
  if (d == 0) return {l2_norm2(f), {}};
  QVec v(d);
  for (std::size_t i = 0; i < d; ++i) v[i] = inner(f, t.generators()[i]);
  const QMat g = gram_matrix_on(t.generators(), f.domain_ptr());
  const QVec x = gram_solve(g, v);
  Rat value = l2_norm2(f);
  for (std::size_t i = 0; i < d; ++i) {
    value -= 2 * v[i] * x[i];
    for (std::size_t j = 0; j < d; ++j) value += x[i] * g[i][j] * x[j];
  }
  return {value, x};
}

/// Donaldson-Futaki invariant DF(F) = (b0 a1 - b1 a0) / a0^2 of a good
/// filtration; the weight function must be a true polynomial.
inline Rat df(const Filtration& f) {
  const WeightPolynomial w = fit_weight_poly(f, 1);
  if (w.period != 1)
    throw Error(Errc::NotGood,
                "weight quasipolynomial period " + std::to_string(w.period) +
                    " (the Donaldson-Futaki invariant needs an eventually "
                    "polynomial weight function)");
  const int n = f.dim();
  const WeightPolynomial eh = ehrhart_fit(f.domain());
  const Rat a0 = eh.coeff(n), a1 = eh.coeff(n - 1);
  const Rat b0 = w.coeff(n + 1), b1 = w.coeff(n);
  return (b0 * a1 - b1 * a0) / (a0 * a0);
}

/// Futaki invariant of a one-parameter subgroup: DF of its product
/// filtration.
inline Rat futaki(const OneParamSubgroup& beta,
                  std::shared_ptr<const LatticePolytope> p) {
  return df(Filtration::from_one_param(beta, std::move(p)));
}

/// Relative DF: DF minus the Gram-projected Futaki contributions of the
/// torus generators.
inline Rat df_rel(const Filtration& f, const TorusBasis& t) {
  Rat value = df(f);
  const std::size_t d = t.rank_d();
  if (d == 0) return value;
  QVec v(d);
  for (std::size_t i = 0; i < d; ++i) v[i] = inner(f, t.generators()[i]);
  const QVec x = gram_solve(gram_matrix_on(t.generators(), f.domain_ptr()), v);
  for (std::size_t i = 0; i < d; ++i)
    value -= x[i] * futaki(t.generators()[i], f.domain_ptr());
  return value;
}

/// r-th Chow weight Chow_r(F) = r b0/a0 - w_F(r)/h(r).
inline Rat chow(const Filtration& f, int r) {
  if (r < 1) throw Error(Errc::ValidationError, "chow needs r >= 1");
  const Rat a0 = f.domain().volume();
  const Rat b0 = leading_coeffs(f).first;
  const Int h = hilbert_count(f.domain(), r);
  return Rat(r) * b0 / a0 - Rat(weight_sum(f, r, 1)) / Rat(h);
}

/// Relative r-th Chow weight: the torus corrections use the level-r inner
/// products, Gram-solved as in df_rel.
inline Rat chow_rel(const Filtration& f, const TorusBasis& t, int r) {
  Rat value = chow(f, r);
  const std::size_t d = t.rank_d();
  if (d == 0) return value;
  std::vector<Filtration> gens;
  for (const OneParamSubgroup& b : t.generators())
    gens.push_back(Filtration::from_one_param(b, f.domain_ptr()));
  QMat g(d, QVec(d));
  QVec v(d);
  for (std::size_t i = 0; i < d; ++i) {
    v[i] = inner_r(f, t.generators()[i], r);
    for (std::size_t j = 0; j < d; ++j)
      g[i][j] = inner_r(gens[i], t.generators()[j], r);
  }
  const QVec x = gram_solve(std::move(g), std::move(v));
  for (std::size_t i = 0; i < d; ++i) value -= x[i] * chow(gens[i], r);
  return value;
}

/// Sequence Chow_{1,T}(F_(r)) of relative Chow weights of the tautological
/// approximations; converges to DF_T for good filtrations.
inline std::vector<std::pair<int, Rat>> chow_inf_estimate(
    const Filtration& f, const TorusBasis& t, const std::vector<int>& rs) {
  std::vector<std::pair<int, Rat>> out;
  for (int r : rs) {
    const Filtration fr = approximate(f, r);
    std::vector<OneParamSubgroup> gens_r;
    for (const OneParamSubgroup& b : t.generators())
      gens_r.push_back(
          OneParamSubgroup{AffineForm{b.form.u, b.form.c * r}});
    const TorusBasis tr(fr.domain_ptr(), std::move(gens_r));
    out.emplace_back(r, chow_rel(fr, tr, 1));
  }
  return out;
}

struct Extremes {
  Rat e_max;  // essential supremum of G_F (a subdivision vertex)
  Rat m_inf;  // essential infimum, attained at a vertex of P by concavity
  Rat mean;   // average b0 / vol(P)
};

inline Extremes extremes(const Filtration& f) {
  const std::vector<RatAffine> env = envelope_forms(f);
  const std::vector<QVec> dom = f.domain().qvertices();
  auto env_value = [&env](const QVec& x) {
    Rat best = env[0].eval(x);
    for (std::size_t i = 1; i < env.size(); ++i)
      best = std::min(best, env[i].eval(x));
    return best;
  };
  std::optional<Rat> emax;
  for (const Simplex& cell : subdivide_common(dom, {env}))
    for (const QVec& v : cell.verts) {
      const Rat g = env_value(v);
      if (!emax || g > *emax) emax = g;
    }
  std::optional<Rat> m;
  for (const QVec& v : dom) {
    const Rat g = env_value(v);
    if (!m || g < *m) m = g;
  }
  const Rat mean = integrate_envelope(dom, env) / f.domain().volume();
  return {*emax, *m, mean};
}

inline Rat an_constant(int n) { return Rat(5 * n - 1, 2 * n); }
inline Rat bn_constant(int n) { return Rat(7 * n - 1, 2 * n); }

struct LambdaThreshold {
  Rat lambda;       // the blowup cut-off level
  Rat delta_bound;  // admissible perturbation (mean - M_F)/(A_n B_n)
};

/// Destabilizing level Lambda_F = mean - (mean - M_F)/A_n with
/// A_n = (5n-1)/(2n), lying strictly between M_F and the mean; the delta
/// bound uses B_n = (7n-1)/(2n).
inline LambdaThreshold lambda_threshold(const Filtration& f) {
  const int n = f.dim();
  if (n < 2)
    throw Error(Errc::DimensionTooSmall,
                "lambda threshold needs dimension >= 2");
  const Extremes ex = extremes(f);
  if (ex.m_inf == ex.mean)
    throw Error(Errc::DegenerateFiltration,
                "concave transform is constant (M_F equals the mean)");
  const Rat an = an_constant(n), bn = bn_constant(n);
  const Rat gap = ex.mean - ex.m_inf;
  return {ex.mean - gap / an, gap / (an * bn)};
}

namespace detail {

inline std::vector<QVec> corner_simplex_vertices(int n, const Rat& side) {
  std::vector<QVec> verts;
  verts.push_back(QVec(static_cast<std::size_t>(n), Rat(0)));
  for (int i = 0; i < n; ++i) {
    QVec v(static_cast<std::size_t>(n), Rat(0));
    v[static_cast<std::size_t>(i)] = side;
    verts.push_back(std::move(v));
  }
  return verts;
}

inline Rat envelope_max_over(const std::vector<QVec>& region,
                             const std::vector<RatAffine>& env) {
  auto value = [&env](const QVec& x) {
    Rat best = env[0].eval(x);
    for (std::size_t i = 1; i < env.size(); ++i)
      best = std::min(best, env[i].eval(x));
    return best;
  };
  std::optional<Rat> best;
  for (const Simplex& cell : subdivide_common(region, {env}))
    for (const QVec& v : cell.verts) {
      const Rat g = value(v);
      if (!best || g > *best) best = g;
    }
  return *best;
}

}  // namespace detail

/// Blowup nu-weight
///   nu = (n-2)! a0 ( Lambda (3n-1) / (2 (n-1)!) - r m^{n-1} int_shell G_F )
/// over the shell between the corner simplices of sizes 1/m and 1/m - n/r,
/// with the bound G_F <= Lambda on the 1/m corner simplex checked exactly.
inline Rat nu_weight(const Filtration& f, int m, int r, const Rat& lambda) {
  const int n = f.dim();
  if (n < 2)
    throw Error(Errc::DimensionTooSmall, "nu weight needs dimension >= 2");
  if (m < 1 || r < 1)
    throw Error(Errc::ValidationError, "nu weight needs m, r >= 1");
  const Rat outer(1, m);
  const Rat inner_side = outer - Rat(n, r);
  if (inner_side <= 0)
    throw Error(Errc::ShellEmpty,
                "shell is empty: need 1/m - n/r > 0");
  const std::vector<QVec> outer_simplex =
      detail::corner_simplex_vertices(n, outer);
  for (const QVec& v : outer_simplex)
    if (!f.domain().contains(v))
      throw Error(Errc::SimplexNotContained,
                  "corner simplex of size 1/m is not contained in the "
                  "polytope");
  const std::vector<RatAffine> env = envelope_forms(f);
  const Rat gmax = detail::envelope_max_over(outer_simplex, env);
  if (gmax > lambda)
    throw Error(Errc::BoundViolated,
                "concave transform exceeds Lambda on the corner simplex "
                "(max " + rat_to_string(gmax) + " > " +
                    rat_to_string(lambda) + ")");
  const Rat shell =
      integrate_envelope(outer_simplex, env) -
      integrate_envelope(detail::corner_simplex_vertices(n, inner_side), env);
  Int m_pow = 1;
  for (int i = 0; i + 1 < n; ++i) m_pow *= m;
  const Rat a0 = f.domain().volume();
  const Rat head = lambda * Rat(3 * n - 1) / Rat(2 * factorial(n - 1));
  return Rat(factorial(n - 2)) * a0 * (head - Rat(r) * Rat(m_pow) * shell);
}

/// Relative nu-weight: subtracts the Gram-projected generator terms
/// nu(beta_i) - b_{i,0}/a0.
inline Rat nu_rel(const Filtration& f, const TorusBasis& t, int m, int r,
                  const Rat& lambda) {
  Rat value = nu_weight(f, m, r, lambda);
  const std::size_t d = t.rank_d();
  if (d == 0) return value;
  QVec v(d);
  for (std::size_t i = 0; i < d; ++i) v[i] = inner(f, t.generators()[i]);
  const QVec x = gram_solve(gram_matrix_on(t.generators(), f.domain_ptr()), v);
  const Rat a0 = f.domain().volume();
  const std::vector<QVec> dom = f.domain().qvertices();
  for (std::size_t i = 0; i < d; ++i) {
    const Filtration fi =
        Filtration::from_one_param(t.generators()[i], f.domain_ptr());
    const Rat bi0 =
        integrate_envelope(dom, {t.generators()[i].form.limit_form()});
    value -= x[i] * (nu_weight(fi, m, r, lambda) - bi0 / a0);
  }
  return value;
}

/// Difference of CM degrees of the two toric test configurations encoded by
/// good filtrations on the same polytope: df(F1) - df(F2).
inline Rat cm_difference(const Filtration& f1, const Filtration& f2) {
  if (!(f1.domain() == f2.domain()))
    throw Error(Errc::DomainMismatch,
                "cm_difference needs filtrations on the same polytope");
  return df(f1) - df(f2);
}

/// Bundle of everything computable for one filtration, used by reporting.
struct InvariantReport {
  Rat a0, a1;            // Hilbert coefficients
  Rat b0, c0;            // integral leading weight coefficients
  std::optional<Rat> b1;  // subleading weight coefficient (good case)
  std::optional<int> weight_period;  // set when not good
  Rat norm2, mean, e_max, m_inf;
  std::optional<Rat> df_value, df_rel_value, reduced;
  std::vector<Rat> inner_products;  // per torus generator
  std::optional<Rat> lambda, delta_bound;
};

inline InvariantReport full_report(const Filtration& f,
                                   const TorusBasis* torus) {
  InvariantReport rep;
  const int n = f.dim();
  const WeightPolynomial eh = ehrhart_fit(f.domain());
  rep.a0 = eh.coeff(n);
  rep.a1 = eh.coeff(n - 1);
  const auto [b0, c0] = leading_coeffs(f);
  rep.b0 = b0;
  rep.c0 = c0;
  rep.norm2 = l2_norm2(f);
  const Extremes ex = extremes(f);
  rep.e_max = ex.e_max;
  rep.m_inf = ex.m_inf;
  rep.mean = ex.mean;
  try {
    const WeightPolynomial w = fit_weight_poly(f, 1);
    if (w.period == 1) {
      rep.b1 = w.coeff(n);
      rep.df_value = (b0 * rep.a1 - *rep.b1 * rep.a0) / (rep.a0 * rep.a0);
    } else {
      rep.weight_period = w.period;
    }
  } catch (const Error&) {
    rep.weight_period = 0;  // no quasipolynomial of period <= 4 found
  }
  if (torus) {
    for (const OneParamSubgroup& b : torus->generators())
      rep.inner_products.push_back(inner(f, b));
    rep.reduced = reduced_norm2(f, *torus).value;
    if (rep.df_value) rep.df_rel_value = df_rel(f, *torus);
  }
  if (n >= 2 && ex.m_inf != ex.mean) {
    const LambdaThreshold lt = lambda_threshold(f);
    rep.lambda = lt.lambda;
    rep.delta_bound = lt.delta_bound;
  }
  return rep;
}

}  // namespace kfiltr
