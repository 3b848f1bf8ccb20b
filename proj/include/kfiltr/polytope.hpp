#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "kfiltr/linalg.hpp"
#include "kfiltr/polynomial.hpp"
#include "kfiltr/rational.hpp"

namespace kfiltr {

class LatticePolytope;

/// Closed halfspace { x : <normal, x> >= offset } with primitive integer
/// normal. Facets of lattice polytopes have integer offsets; cells produced
/// by subdivision may have rational ones.
struct Halfspace {
  IVec normal;
  Rat offset;

  Rat eval(const QVec& x) const { return dot(to_qvec(normal), x) - offset; }
  bool operator<(const Halfspace& o) const {
    return std::tie(normal, offset) < std::tie(o.normal, o.offset);
  }
  bool operator==(const Halfspace& o) const {
    return normal == o.normal && offset == o.offset;
  }
};

/// Affine function x -> <u, x> + c with rational data. Used for envelope
/// pieces and integrands; filtration forms proper are integral.
struct RatAffine {
  QVec u;
  Rat c;

  Rat eval(const QVec& x) const { return dot(u, x) + c; }
  bool operator<(const RatAffine& o) const {
    return std::tie(u, c) < std::tie(o.u, o.c);
  }
  bool operator==(const RatAffine& o) const { return u == o.u && c == o.c; }
};

struct Simplex {
  std::vector<QVec> verts;  // n+1 affinely independent rational points

  int dim() const { return static_cast<int>(verts.size()) - 1; }

  Rat volume() const {
    const int n = dim();
    QMat m(static_cast<std::size_t>(n), QVec(static_cast<std::size_t>(n)));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
            verts[static_cast<std::size_t>(i) + 1][static_cast<std::size_t>(j)] -
            verts[0][static_cast<std::size_t>(j)];
    return rat_abs(det(std::move(m))) / Rat(factorial(n));
  }

  QVec centroid() const {
    QVec c(verts[0].size(), Rat(0));
    for (const QVec& v : verts) c = vadd(c, v);
    return vscale(Rat(1, Int(verts.size())), c);
  }
};

namespace detail {

inline bool next_combination(std::vector<std::size_t>& idx, std::size_t m) {
  const std::size_t k = idx.size();
  for (std::size_t i = k; i-- > 0;) {
    if (idx[i] < m - (k - i)) {
      ++idx[i];
      for (std::size_t j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
      return true;
    }
  }
  return false;
}

inline int affine_rank(const std::vector<QVec>& pts) {
  if (pts.empty()) return -1;
  QMat rows;
  for (std::size_t i = 1; i < pts.size(); ++i)
    rows.push_back(vsub(pts[i], pts[0]));
  if (rows.empty()) return 0;
  return rank(std::move(rows));
}

/// Scales (w, o) by a positive rational so that w becomes primitive
/// integral, preserving the halfspace orientation.
inline Halfspace canonical_halfspace(const QVec& w, const Rat& o) {
  Int l = 1;
  for (const Rat& q : w) l = lcm(l, denominator(q));
  IVec iw(w.size());
  Int g = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    iw[i] = numerator(w[i]) * (l / denominator(w[i]));
    g = gcd(g, iw[i]);
  }
  if (g == 0) throw Error(Errc::DegenerateInput, "zero halfspace normal");
  for (Int& x : iw) x /= g;
  return Halfspace{std::move(iw), o * Rat(l, g)};
}

}  // namespace detail

/// Facet-supporting halfspaces of the convex hull of a full-dimensional
/// point set, by brute force over n-point subsets. Degeneracies (collinear
/// subsets, points interior to facets) are handled; output is sorted and
/// duplicate-free.
inline std::vector<Halfspace> hull_facets(const std::vector<QVec>& pts,
                                          int n) {
  const std::size_t m = pts.size();
  std::set<Halfspace> out;
  if (n == 1) {
    QVec lo = pts[0], hi = pts[0];
    for (const QVec& p : pts) {
      lo[0] = std::min(lo[0], p[0]);
      hi[0] = std::max(hi[0], p[0]);
    }
    out.insert(Halfspace{{Int(1)}, lo[0]});
    out.insert(Halfspace{{Int(-1)}, -hi[0]});
    return {out.begin(), out.end()};
  }
  std::vector<std::size_t> idx(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  if (m < static_cast<std::size_t>(n)) return {};
  do {
    QMat rows;
    for (std::size_t i = 1; i < idx.size(); ++i)
      rows.push_back(vsub(pts[idx[i]], pts[idx[0]]));
    auto normal = nullspace_vector(std::move(rows), static_cast<std::size_t>(n));
    if (!normal) continue;
    const Rat o = dot(*normal, pts[idx[0]]);
    bool above = false, below = false;
    for (const QVec& p : pts) {
      const Rat v = dot(*normal, p);
      if (v > o) above = true;
      if (v < o) below = true;
      if (above && below) break;
    }
    if (above && below) continue;
    if (below) {
      for (Rat& x : *normal) x = -x;
      out.insert(detail::canonical_halfspace(*normal, -o));
    } else {
      out.insert(detail::canonical_halfspace(*normal, o));
    }
  } while (detail::next_combination(idx, m));
  return {out.begin(), out.end()};
}

inline bool point_satisfies(const std::vector<Halfspace>& hs, const QVec& x) {
  for (const Halfspace& h : hs)
    if (h.eval(x) < 0) return false;
  return true;
}

/// Vertices of the polyhedron cut out by the halfspaces, by brute force
/// over n-subsets. Empty result means an empty (or unbounded-degenerate)
/// intersection at desk scale.
inline std::vector<QVec> enumerate_vertices(const std::vector<Halfspace>& hs,
                                            int n) {
  std::set<QVec> out;
  const std::size_t m = hs.size();
  if (m < static_cast<std::size_t>(n)) return {};
  std::vector<std::size_t> idx(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  do {
    QMat a;
    QVec b;
    for (std::size_t i : idx) {
      a.push_back(to_qvec(hs[i].normal));
      b.push_back(hs[i].offset);
    }
    auto x = solve_linear(std::move(a), std::move(b));
    if (x && point_satisfies(hs, *x)) out.insert(*x);
  } while (detail::next_combination(idx, m));
  return {out.begin(), out.end()};
}

/// Deterministic triangulation of the convex hull of a point set: cone from
/// the lexicographically smallest point over recursively triangulated
/// facets. Returns an empty list when the hull is not full-dimensional.
inline std::vector<Simplex> triangulate_points(std::vector<QVec> pts, int n) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (detail::affine_rank(pts) < n) return {};
  if (n == 1) {
    return {Simplex{{pts.front(), pts.back()}}};
  }
  if (pts.size() == static_cast<std::size_t>(n) + 1) {
    return {Simplex{std::move(pts)}};
  }
  const QVec apex = pts.front();
  std::vector<Simplex> cells;
  for (const Halfspace& f : hull_facets(pts, n)) {
    if (f.eval(apex) == 0) continue;
    std::vector<QVec> fpts;
    for (const QVec& p : pts)
      if (f.eval(p) == 0) fpts.push_back(p);
    std::size_t drop = 0;
    while (f.normal[drop] == 0) ++drop;
    std::map<QVec, QVec> lift;
    std::vector<QVec> proj;
    for (const QVec& p : fpts) {
      QVec q;
      for (std::size_t j = 0; j < p.size(); ++j)
        if (j != drop) q.push_back(p[j]);
      lift[q] = p;
      proj.push_back(std::move(q));
    }
    for (const Simplex& sub : triangulate_points(std::move(proj), n - 1)) {
      Simplex s;
      s.verts.push_back(apex);
      for (const QVec& q : sub.verts) s.verts.push_back(lift.at(q));
      cells.push_back(std::move(s));
    }
  }
  return cells;
}

/// Splits a simplex along the hyperplane <normal, x> = offset. Pieces that
/// are not full-dimensional are dropped.
inline std::pair<std::vector<Simplex>, std::vector<Simplex>>
split_simplex(const Simplex& s, const IVec& normal, const Rat& offset) {
  const int n = s.dim();
  std::vector<Rat> vals(s.verts.size());
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < s.verts.size(); ++i) {
    vals[i] = dot(to_qvec(normal), s.verts[i]) - offset;
    pos = pos || vals[i] > 0;
    neg = neg || vals[i] < 0;
  }
  if (!neg) return {{s}, {}};
  if (!pos) return {{}, {s}};
  std::vector<QVec> plus, minus;
  for (std::size_t i = 0; i < s.verts.size(); ++i) {
    if (vals[i] >= 0) plus.push_back(s.verts[i]);
    if (vals[i] <= 0) minus.push_back(s.verts[i]);
  }
  for (std::size_t i = 0; i < s.verts.size(); ++i)
    for (std::size_t j = i + 1; j < s.verts.size(); ++j) {
      if (vals[i] * vals[j] >= 0) continue;
      const Rat t = vals[i] / (vals[i] - vals[j]);
      const QVec x =
          vadd(s.verts[i], vscale(t, vsub(s.verts[j], s.verts[i])));
      plus.push_back(x);
      minus.push_back(x);
    }
  return {triangulate_points(std::move(plus), n),
          triangulate_points(std::move(minus), n)};
}

/// Piecewise-affine function given as a lower envelope of affine forms,
/// together with a simplicial subdivision on which single forms are active.
struct PiecewiseAffine {
  std::vector<RatAffine> forms;
  std::vector<std::pair<RatAffine, Simplex>> pieces;
  std::vector<QVec> domain_vertices;

  Rat value(const QVec& x) const {
    Rat best = forms.front().eval(x);
    for (std::size_t i = 1; i < forms.size(); ++i)
      best = std::min(best, forms[i].eval(x));
    return best;
  }
};

/// Index of the envelope form active on the cell, evaluated at the
/// centroid; ties resolved by smallest form index.
inline std::size_t active_form_index(const std::vector<RatAffine>& env,
                                     const Simplex& cell) {
  const QVec c = cell.centroid();
  std::size_t best = 0;
  Rat bv = env[0].eval(c);
  for (std::size_t i = 1; i < env.size(); ++i) {
    const Rat v = env[i].eval(c);
    if (v < bv) {
      bv = v;
      best = i;
    }
  }
  return best;
}

/// Common simplicial refinement of a triangulation of the convex domain on
/// which every listed lower envelope is affine. A base triangulation is
/// sliced along each hyperplane where two forms of one envelope agree;
/// hyperplanes are processed in canonical sorted order.
inline std::vector<Simplex> subdivide_common(
    const std::vector<QVec>& domain_vertices,
    const std::vector<std::vector<RatAffine>>& envelopes) {
  const int n = static_cast<int>(domain_vertices.empty()
                                     ? 0
                                     : domain_vertices[0].size());
  std::vector<Simplex> cells = triangulate_points(domain_vertices, n);
  if (cells.empty())
    throw Error(Errc::DegenerateInput,
                "subdivision domain is not full-dimensional");
  std::set<Halfspace> cuts;  // cut hyperplanes, canonically oriented
  for (const auto& env : envelopes)
    for (std::size_t i = 0; i < env.size(); ++i)
      for (std::size_t j = i + 1; j < env.size(); ++j) {
        QVec d = vsub(env[i].u, env[j].u);
        bool zero = true;
        for (const Rat& x : d) zero = zero && x == 0;
        if (zero) continue;
        Halfspace h = detail::canonical_halfspace(d, env[j].c - env[i].c);
        bool flip = false;
        for (const Int& x : h.normal)
          if (x != 0) {
            flip = x < 0;
            break;
          }
        if (flip) {
          for (Int& x : h.normal) x = -x;
          h.offset = -h.offset;
        }
        cuts.insert(std::move(h));
      }
  for (const Halfspace& cut : cuts) {
    std::vector<Simplex> next;
    for (const Simplex& cell : cells) {
      auto [geq, leq] = split_simplex(cell, cut.normal, cut.offset);
      next.insert(next.end(), geq.begin(), geq.end());
      next.insert(next.end(), leq.begin(), leq.end());
    }
    cells = std::move(next);
  }
  return cells;
}

inline std::vector<Simplex> subdivide_common(
    const LatticePolytope& p,
    const std::vector<std::vector<RatAffine>>& envelopes);

inline std::vector<Simplex> subdivide_common(
    const LatticePolytope& p, const std::vector<PiecewiseAffine>& fns) {
  std::vector<std::vector<RatAffine>> envelopes;
  for (const PiecewiseAffine& f : fns) envelopes.push_back(f.forms);
  return subdivide_common(p, envelopes);
}

/// Exact integral over one simplex of a product of at most two affine
/// forms, via the classical moment identities for barycentric coordinates.
inline Rat integrate_on_simplex(const Simplex& s,
                                const std::vector<RatAffine>& factors) {
  const int n = s.dim();
  const Rat vol = s.volume();
  if (factors.empty()) return vol;
  if (factors.size() == 1) {
    Rat sum = 0;
    for (const QVec& v : s.verts) sum += factors[0].eval(v);
    return vol * sum / Rat(n + 1);
  }
  if (factors.size() == 2) {
    Rat sl = 0, sm = 0, slm = 0;
    for (const QVec& v : s.verts) {
      const Rat a = factors[0].eval(v);
      const Rat b = factors[1].eval(v);
      sl += a;
      sm += b;
      slm += a * b;
    }
    return vol * (slm + sl * sm) / Rat(Int(n + 1) * Int(n + 2));
  }
  throw Error(Errc::UnsupportedDegree,
              "integrand of degree > 2 (more than two affine factors)");
}

/// Exact integral of per-cell products of <= 2 affine forms over a list of
/// simplices.
inline Rat integrate_poly2(const std::vector<Simplex>& cells,
                           const std::vector<std::vector<RatAffine>>& factors) {
  Rat total = 0;
  for (std::size_t i = 0; i < cells.size(); ++i)
    total += integrate_on_simplex(cells[i], factors.at(i));
  return total;
}

inline Rat integrate_envelope(const std::vector<QVec>& domain,
                              const std::vector<RatAffine>& env) {
  Rat total = 0;
  for (const Simplex& cell : subdivide_common(domain, {env}))
    total += integrate_on_simplex(cell, {env[active_form_index(env, cell)]});
  return total;
}

inline Rat integrate_envelope_square(const std::vector<QVec>& domain,
                                     const std::vector<RatAffine>& env) {
  Rat total = 0;
  for (const Simplex& cell : subdivide_common(domain, {env})) {
    const RatAffine& f = env[active_form_index(env, cell)];
    total += integrate_on_simplex(cell, {f, f});
  }
  return total;
}

inline Rat integrate_envelope_product(const std::vector<QVec>& domain,
                                      const std::vector<RatAffine>& ea,
                                      const std::vector<RatAffine>& eb) {
  Rat total = 0;
  for (const Simplex& cell : subdivide_common(domain, {ea, eb})) {
    const RatAffine& f = ea[active_form_index(ea, cell)];
    const RatAffine& g = eb[active_form_index(eb, cell)];
    total += integrate_on_simplex(cell, {f, g});
  }
  return total;
}

/// Full-dimensional lattice polytope given by its extreme points. The
/// constructor validates extremality and full dimension; rational-vertex
/// bodies are rejected upstream at parse time.
class LatticePolytope {
 public:
  LatticePolytope(int dim, std::vector<IVec> vertices) : dim_(dim) {
    if (dim < 1)
      throw Error(Errc::ValidationError, "polytope dimension must be >= 1");
    if (vertices.empty())
      throw Error(Errc::ValidationError, "polytope has no vertices");
    for (const IVec& v : vertices)
      if (static_cast<int>(v.size()) != dim)
        throw Error(Errc::ValidationError, "vertex arity != dim");
    std::sort(vertices.begin(), vertices.end());
    const std::size_t before = vertices.size();
    vertices.erase(std::unique(vertices.begin(), vertices.end()),
                   vertices.end());
    if (vertices.size() != before)
      throw Error(Errc::ValidationError, "duplicate vertex in polytope");
    verts_ = std::move(vertices);
    std::vector<QVec> q = qvertices();
    if (detail::affine_rank(q) != dim)
      throw Error(Errc::ValidationError,
                  "polytope is not full-dimensional in R^" +
                      std::to_string(dim));
    facets_ = hull_facets(q, dim);
    for (std::size_t i = 0; i < q.size(); ++i) {
      QMat tight;
      for (const Halfspace& f : facets_)
        if (f.eval(q[i]) == 0) tight.push_back(to_qvec(f.normal));
      if (rank(std::move(tight)) != dim)
        throw Error(Errc::ValidationError,
                    "vertex " + std::to_string(i) +
                        " is not an extreme point of the hull");
    }
    Rat vol = 0;
    for (const Simplex& s : triangulate_points(q, dim)) vol += s.volume();
    volume_ = vol;
  }

  int dim() const { return dim_; }
  const std::vector<IVec>& vertices() const { return verts_; }
  const std::vector<Halfspace>& facets() const { return facets_; }
  const Rat& volume() const { return volume_; }

  std::vector<QVec> qvertices() const {
    std::vector<QVec> q;
    q.reserve(verts_.size());
    for (const IVec& v : verts_) q.push_back(to_qvec(v));
    return q;
  }

  bool operator==(const LatticePolytope& o) const {
    return dim_ == o.dim_ && verts_ == o.verts_;
  }

  /// Membership of an integer point in the dilate kP.
  bool contains_scaled(const IVec& a, const Int& k) const {
    for (const Halfspace& f : facets_)
      if (Rat(dot_int(f.normal, a)) < Rat(k) * f.offset) return false;
    return true;
  }

  bool contains(const QVec& x) const { return point_satisfies(facets_, x); }

  /// (kP) n Z^n in lexicographic order; cardinality is the Hilbert
  /// function value h(k). Dilates are memoized: enumeration dominates the
  /// cost of every weight fit.
  const std::vector<IVec>& lattice_points(const Int& k) const {
    std::lock_guard<std::mutex> lock(cache_->mu);
    auto it = cache_->levels.find(k);
    if (it == cache_->levels.end())
      it = cache_->levels.emplace(k, enumerate(k)).first;
    return it->second;
  }

 private:
  std::vector<IVec> enumerate(const Int& k) const {
    std::vector<Int> lo(static_cast<std::size_t>(dim_)),
        hi(static_cast<std::size_t>(dim_));
    for (int j = 0; j < dim_; ++j) {
      Int mn = verts_[0][static_cast<std::size_t>(j)];
      Int mx = mn;
      for (const IVec& v : verts_) {
        mn = std::min(mn, v[static_cast<std::size_t>(j)]);
        mx = std::max(mx, v[static_cast<std::size_t>(j)]);
      }
      lo[static_cast<std::size_t>(j)] = mn * k;
      hi[static_cast<std::size_t>(j)] = mx * k;
    }
    std::vector<IVec> out;
    IVec a = lo;
    while (true) {
      if (contains_scaled(a, k)) out.push_back(a);
      int j = dim_ - 1;
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

 public:
  LatticePolytope scaled(const Int& r) const {
    std::vector<IVec> v = verts_;
    for (IVec& w : v)
      for (Int& x : w) x *= r;
    return LatticePolytope(dim_, std::move(v));
  }

  /// Primitive directions of the edges incident to the given vertex.
  std::vector<IVec> edge_directions_at(std::size_t vertex_index) const {
    const std::vector<QVec> q = qvertices();
    const QVec& v = q.at(vertex_index);
    std::vector<IVec> dirs;
    for (std::size_t j = 0; j < q.size(); ++j) {
      if (j == vertex_index) continue;
      QMat tight;
      for (const Halfspace& f : facets_)
        if (f.eval(v) == 0 && f.eval(q[j]) == 0)
          tight.push_back(to_qvec(f.normal));
      if (rank(std::move(tight)) == dim_ - 1) {
        // Primitive direction along the edge, oriented away from v.
        IVec d(static_cast<std::size_t>(dim_));
        Int g = 0;
        for (int t = 0; t < dim_; ++t) {
          d[static_cast<std::size_t>(t)] =
              verts_[j][static_cast<std::size_t>(t)] -
              verts_[vertex_index][static_cast<std::size_t>(t)];
          g = gcd(g, d[static_cast<std::size_t>(t)]);
        }
        for (Int& x : d) x /= g;
        dirs.push_back(std::move(d));
      }
    }
    // Descending order maps an already-standard orthant cone to the
    // identity coordinate change.
    std::sort(dirs.begin(), dirs.end(), std::greater<>());
    return dirs;
  }

 private:
  struct PointCache {
    std::mutex mu;
    std::map<Int, std::vector<IVec>> levels;
  };

  int dim_;
  std::vector<IVec> verts_;
  std::vector<Halfspace> facets_;
  Rat volume_;
  // Shared across copies; copies describe the same polytope.
  std::shared_ptr<PointCache> cache_ = std::make_shared<PointCache>();
};

inline std::vector<Simplex> subdivide_common(
    const LatticePolytope& p,
    const std::vector<std::vector<RatAffine>>& envelopes) {
  return subdivide_common(p.qvertices(), envelopes);
}

/// lattice_points as a free operation, matching the public surface.
inline const std::vector<IVec>& lattice_points(const LatticePolytope& p,
                                               const Int& k) {
  if (k < 1) throw Error(Errc::ValidationError, "lattice_points needs k >= 1");
  return p.lattice_points(k);
}

/// Fits the degree-n Ehrhart polynomial from exact counts at k = 1..n+1 and
/// verifies it against k = n+2..2n+2. Verification failure signals
/// non-lattice input.
inline WeightPolynomial ehrhart_fit(const LatticePolytope& p) {
  const int n = p.dim();
  return fit_quasipolynomial(
      [&p](int k) { return Int(p.lattice_points(k).size()); }, n, 2 * n + 2,
      /*max_period=*/1, Errc::FitMismatch, /*max_onset=*/1);
}

namespace detail {

/// Drops table points lying on or below a segment between two points still
/// present (checked along a fixed direction stencil, repeated to a
/// fixpoint). Each removal keeps the upper hull of the remaining graph
/// unchanged, so the survivors span the same envelope.
inline std::map<IVec, Int> prune_for_envelope(std::map<IVec, Int> table,
                                              std::size_t n) {
  std::vector<IVec> dirs;
  {
    IVec d(n, Int(0));
    std::function<void(std::size_t)> gen = [&](std::size_t i) {
      if (i == n) {
        bool zero = true, leading_set = false, positive = false;
        for (const Int& x : d) {
          if (x != 0 && !leading_set) {
            leading_set = true;
            positive = x > 0;
          }
          zero = zero && x == 0;
        }
        if (!zero && positive) dirs.push_back(d);
        return;
      }
      for (int v = -1; v <= 1; ++v) {
        d[i] = v;
        gen(i + 1);
      }
      d[i] = 0;
    };
    gen(0);
  }
  for (int scale : {1, 2, 4, 8})
    for (bool changed = true; changed;) {
      changed = false;
      for (auto it = table.begin(); it != table.end();) {
        bool drop = false;
        for (const IVec& d : dirs) {
          IVec lo(n), hi(n);
          for (std::size_t j = 0; j < n; ++j) {
            lo[j] = it->first[j] - d[j] * scale;
            hi[j] = it->first[j] + d[j] * scale;
          }
          auto a = table.find(lo);
          auto b = table.find(hi);
          if (a != table.end() && b != table.end() &&
              2 * it->second <= a->second + b->second) {
            drop = true;
            break;
          }
        }
        if (drop) {
          it = table.erase(it);
          changed = true;
        } else {
          ++it;
        }
      }
    }
  return table;
}

}  // namespace detail

/// Exact upper concave envelope of the finite graph {(a, t(a))}: the list
/// of affine forms whose pointwise minimum is the concave hull on
/// conv(points). Affine tables short-circuit to their single form; other
/// tables are pruned, then upper facets are enumerated by brute force over
/// (n+1)-point subsets of the survivors.
inline std::vector<RatAffine> upper_concave_envelope(
    const std::vector<IVec>& pts, const std::vector<Int>& vals) {
  const std::size_t n = pts.empty() ? 0 : pts[0].size();
  if (pts.size() < n + 1)
    throw Error(Errc::DegenerateInput, "too few points for an envelope");

  // Fast path: an affine table is its own envelope.
  {
    std::vector<std::size_t> basis;
    QMat rows;
    for (std::size_t i = 0; i < pts.size() && basis.size() < n + 1; ++i) {
      QVec row = to_qvec(pts[i]);
      row.push_back(Rat(1));
      QMat trial = rows;
      trial.push_back(row);
      if (rank(trial) == static_cast<int>(basis.size()) + 1) {
        rows.push_back(std::move(row));
        basis.push_back(i);
      }
    }
    if (basis.size() == n + 1) {
      QVec rhs;
      for (std::size_t i : basis) rhs.push_back(Rat(vals[i]));
      if (auto sol = solve_linear(rows, rhs)) {
        RatAffine f;
        f.u.assign(sol->begin(), sol->end() - 1);
        f.c = sol->back();
        bool affine = true;
        for (std::size_t i = 0; i < pts.size() && affine; ++i)
          affine = f.eval(to_qvec(pts[i])) == Rat(vals[i]);
        if (affine) return {std::move(f)};
      }
    }
  }

  std::map<IVec, Int> table;
  for (std::size_t i = 0; i < pts.size(); ++i) table[pts[i]] = vals[i];
  table = detail::prune_for_envelope(std::move(table), n);
  std::vector<QVec> qpts;
  std::vector<Rat> qvals;
  for (const auto& [a, v] : table) {
    qpts.push_back(to_qvec(a));
    qvals.push_back(Rat(v));
  }
  const std::size_t m = qpts.size();
  {
    // C(m, n+1) guard; desk-scale inputs only.
    double c = 1;
    for (std::size_t i = 0; i < n + 1; ++i)
      c *= static_cast<double>(m - i) / static_cast<double>(i + 1);
    if (c > 2e6)
      throw Error(Errc::BudgetExceeded,
                  "concave envelope: too many lattice points");
  }
  std::set<RatAffine> out;
  std::vector<std::size_t> idx(n + 1);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  do {
    QMat a;
    QVec b;
    for (std::size_t i : idx) {
      QVec row = qpts[i];
      row.push_back(Rat(1));
      a.push_back(std::move(row));
      b.push_back(qvals[i]);
    }
    auto sol = solve_linear(std::move(a), std::move(b));
    if (!sol) continue;
    RatAffine f;
    f.u.assign(sol->begin(), sol->end() - 1);
    f.c = sol->back();
    bool upper = true;
    for (std::size_t i = 0; i < m && upper; ++i)
      upper = f.eval(qpts[i]) >= qvals[i];
    if (upper) out.insert(std::move(f));
  } while (detail::next_combination(idx, m));
  if (out.empty())
    throw Error(Errc::DegenerateInput,
                "envelope points are not full-dimensional");
  return {out.begin(), out.end()};
}

}  // namespace kfiltr
