#pragma once

#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "kfiltr/polytope.hpp"

namespace kfiltr {

/// Integer affine form: a lattice point a in degree k weighs <u,a> + c*k.
struct AffineForm {
  IVec u;
  Int c;

  Int eval(const IVec& a, const Int& k) const { return dot_int(u, a) + c * k; }
  RatAffine limit_form() const { return RatAffine{to_qvec(u), Rat(c)}; }
  bool operator==(const AffineForm& o) const { return u == o.u && c == o.c; }
  bool operator<(const AffineForm& o) const {
    return std::tie(u, c) < std::tie(o.u, o.c);
  }
};

/// One-parameter subgroup of the torus, acting with weight g_{b,k}(a) =
/// <u,a> + c*k on the degree-k monomial basis.
struct OneParamSubgroup {
  AffineForm form;

  OneParamSubgroup negated() const {
    IVec u = form.u;
    for (Int& x : u) x = -x;
    return OneParamSubgroup{AffineForm{std::move(u), -form.c}};
  }
  bool operator==(const OneParamSubgroup& o) const { return form == o.form; }
};

class Filtration;

/// The Okounkov body of a point blowup: after the unimodular change of
/// coordinates sending the corner cone to the standard orthant, the body is
/// closure(mP' \ simplex_1) = mP' intersected with { sum x_i >= 1 }.
struct BlowupBody {
  std::shared_ptr<const LatticePolytope> base;
  std::size_t corner = 0;
  int m = 1;
  IVec corner_vertex;
  std::vector<IVec> edges;  // primitive edge directions at the corner
  std::shared_ptr<const LatticePolytope> transformed_base;  // P'
  std::shared_ptr<const LatticePolytope> body;              // the hat body

  const Rat& volume() const { return body->volume(); }

  /// Slope of a base form in the blown-up coordinates: (E^T u)_j = <edge_j, u>.
  IVec transform_slope(const IVec& u) const {
    IVec out(edges.size());
    for (std::size_t j = 0; j < edges.size(); ++j)
      out[j] = dot_int(edges[j], u);
    return out;
  }
  Int transform_constant(const AffineForm& f) const {
    return f.c + dot_int(f.u, corner_vertex);
  }
};

/// Superlevel set { x in P : G_F(x) >= s } as an H-representation, with its
/// vertices enumerated (empty vertex list means the empty set).
struct SuperlevelBody {
  std::vector<Halfspace> halfspaces;
  std::vector<QVec> vertices;

  bool empty() const { return vertices.empty(); }
  bool contains(const QVec& x) const {
    return point_satisfies(halfspaces, x);
  }
};

/// A torus-invariant (monomial) filtration of the section ring of the
/// polarized toric variety with moment polytope P, encoded by its
/// superadditive lattice weights g_{F,k} on kP. Immutable value type;
/// copies share structure.
class Filtration {
 public:
  enum class Kind { MinAffine, Generated, Shifted, Blowup };

  static Filtration min_affine(std::shared_ptr<const LatticePolytope> domain,
                               std::vector<AffineForm> forms) {
    if (forms.empty())
      throw Error(Errc::ValidationError, "min_affine needs at least one form");
    for (const AffineForm& f : forms)
      if (static_cast<int>(f.u.size()) != domain->dim())
        throw Error(Errc::ValidationError, "form arity != polytope dimension");
    auto impl = std::make_shared<Impl>();
    impl->kind = Kind::MinAffine;
    impl->domain = std::move(domain);
    impl->forms = std::move(forms);
    return Filtration(std::move(impl));
  }

  static Filtration from_one_param(
      const OneParamSubgroup& beta,
      std::shared_ptr<const LatticePolytope> domain) {
    return min_affine(std::move(domain), {beta.form});
  }

  /// Filtration of (Y, rH) generated in degree one by the weight table on
  /// P_r; higher weights are the superadditive closure computed by dynamic
  /// programming. The domain is the dilate rP.
  static Filtration generated(const LatticePolytope& base, int r,
                              std::map<IVec, Int> table) {
    if (r < 1) throw Error(Errc::ValidationError, "generated needs r >= 1");
    const std::vector<IVec> pts = base.lattice_points(r);
    if (table.size() != pts.size())
      throw Error(Errc::ValidationError,
                  "generated table must cover P_r exactly");
    for (const IVec& a : pts)
      if (!table.count(a))
        throw Error(Errc::ValidationError,
                    "generated table is missing a lattice point of P_r");
    auto impl = std::make_shared<Impl>();
    impl->kind = Kind::Generated;
    impl->domain = std::make_shared<LatticePolytope>(base.scaled(r));
    impl->r = r;
    impl->table = std::move(table);
    impl->dp.push_back({});           // unused degree 0 slot
    impl->dp.push_back(impl->table);  // degree 1
    return Filtration(std::move(impl));
  }

  int dim() const { return impl_->domain->dim(); }
  Kind kind() const { return impl_->kind; }
  const LatticePolytope& domain() const { return *impl_->domain; }
  std::shared_ptr<const LatticePolytope> domain_ptr() const {
    return impl_->domain;
  }

  const std::vector<AffineForm>& forms() const {
    require(Kind::MinAffine, "forms");
    return impl_->forms;
  }
  int generated_r() const {
    require(Kind::Generated, "generated_r");
    return impl_->r;
  }
  const std::map<IVec, Int>& generated_table() const {
    require(Kind::Generated, "generated_table");
    return impl_->table;
  }
  const Filtration base() const {
    if (impl_->kind != Kind::Shifted && impl_->kind != Kind::Blowup)
      throw Error(Errc::UnsupportedKind, "base: not a derived filtration");
    return Filtration(impl_->base);
  }
  const Rat& shift_amount() const {
    require(Kind::Shifted, "shift_amount");
    return impl_->shift;
  }
  const BlowupBody& blowup_data() const {
    require(Kind::Blowup, "blowup_data");
    return *impl_->blow;
  }
  /// Base forms rewritten in the blown-up coordinates.
  const std::vector<AffineForm>& blowup_forms() const {
    require(Kind::Blowup, "blowup_forms");
    return impl_->forms;
  }

  /// g_{F,k}(a) for a lattice point a of kP.
  Int lattice_weight(const Int& k, const IVec& a) const {
    if (k < 1)
      throw Error(Errc::ValidationError, "lattice_weight needs k >= 1");
    if (!impl_->domain->contains_scaled(a, k))
      throw Error(Errc::OutOfBody, "point is not in the dilate kP");
    return weight_in_body(k, a);
  }

  bool operator==(const Filtration& f) const {
    if (impl_ == f.impl_) return true;
    if (impl_->kind != f.impl_->kind) return false;
    if (!(*impl_->domain == *f.impl_->domain)) return false;
    switch (impl_->kind) {
      case Kind::MinAffine:
        return impl_->forms == f.impl_->forms;
      case Kind::Generated:
        return impl_->r == f.impl_->r && impl_->table == f.impl_->table;
      case Kind::Shifted:
        return impl_->shift == f.impl_->shift &&
               Filtration(impl_->base) == Filtration(f.impl_->base);
      case Kind::Blowup:
        return impl_->blow->m == f.impl_->blow->m &&
               impl_->blow->corner == f.impl_->blow->corner &&
               Filtration(impl_->base) == Filtration(f.impl_->base);
    }
    return false;
  }

  friend Filtration shift(const Filtration& f, const Rat& s);
  friend Filtration blowup_filtration(const Filtration& f,
                                      const BlowupBody& b);
  friend std::vector<RatAffine> envelope_forms(const Filtration& f);

 private:
  struct Impl {
    Kind kind = Kind::MinAffine;
    std::shared_ptr<const LatticePolytope> domain;
    std::vector<AffineForm> forms;  // MinAffine; Blowup: transformed forms
    int r = 1;                      // Generated
    std::map<IVec, Int> table;      // Generated degree-1 weights
    // Closure levels; deque keeps references stable while higher levels
    // are appended, and a built level is never mutated again.
    mutable std::deque<std::map<IVec, Int>> dp;
    mutable std::mutex dp_mutex;
    std::shared_ptr<const Impl> base;  // Shifted / Blowup
    Rat shift;                         // Shifted
    std::shared_ptr<const BlowupBody> blow;  // Blowup
  };

  explicit Filtration(std::shared_ptr<const Impl> impl)
      : impl_(std::move(impl)) {}

  void require(Kind k, const char* what) const {
    if (impl_->kind != k)
      throw Error(Errc::UnsupportedKind, std::string(what) +
                                             " is not defined for this "
                                             "filtration kind");
  }

  Int weight_in_body(const Int& k, const IVec& a) const {
    switch (impl_->kind) {
      case Kind::MinAffine: {
        Int best = impl_->forms[0].eval(a, k);
        for (std::size_t i = 1; i < impl_->forms.size(); ++i)
          best = std::min(best, impl_->forms[i].eval(a, k));
        return best;
      }
      case Kind::Shifted:
        return Filtration(impl_->base).weight_in_body(k, a) -
               rat_floor(impl_->shift * Rat(k));
      case Kind::Blowup: {
        // Sections of degree k vanish to order >= k at the corner and are
        // weighed in degree k*m of the base; forms are pre-transformed.
        const Int km = k * impl_->blow->m;
        Int best = impl_->forms[0].eval(a, km);
        for (std::size_t i = 1; i < impl_->forms.size(); ++i)
          best = std::min(best, impl_->forms[i].eval(a, km));
        return best;
      }
      case Kind::Generated: {
        const auto& level = dp_level(static_cast<int>(k));
        auto it = level.find(a);
        if (it == level.end())
          throw Error(Errc::OutOfBody,
                      "lattice point of kP is not a k-fold sum of degree-r "
                      "points (non-normal input)");
        return it->second;
      }
    }
    throw Error(Errc::UnsupportedKind, "unreachable filtration kind");
  }

  /// Superadditive closure at level k: max over decompositions into k table
  /// points, built one degree at a time and memoized.
  const std::map<IVec, Int>& dp_level(int k) const {
    std::lock_guard<std::mutex> lock(impl_->dp_mutex);
    while (static_cast<int>(impl_->dp.size()) <= k) {
      const auto& prev = impl_->dp.back();
      std::map<IVec, Int> next;
      for (const auto& [p, vp] : prev)
        for (const auto& [g, vg] : impl_->table) {
          IVec q(p.size());
          for (std::size_t i = 0; i < p.size(); ++i) q[i] = p[i] + g[i];
          const Int val = vp + vg;
          auto [it, inserted] = next.emplace(std::move(q), val);
          if (!inserted && it->second < val) it->second = val;
        }
      impl_->dp.push_back(std::move(next));
    }
    return impl_->dp[static_cast<std::size_t>(k)];
  }

  std::shared_ptr<const Impl> impl_;
};

inline Filtration from_one_param(const OneParamSubgroup& beta,
                                 std::shared_ptr<const LatticePolytope> p) {
  return Filtration::from_one_param(beta, std::move(p));
}

inline Int lattice_weight(const Filtration& f, const Int& k, const IVec& a) {
  return f.lattice_weight(k, a);
}

/// Pointwise twist: every form is translated by the subgroup's form, so
/// g_{F_b,k} = g_{F,k} + g_{b,k} exactly.
inline Filtration twist(const Filtration& f, const OneParamSubgroup& beta) {
  if (f.kind() != Filtration::Kind::MinAffine)
    throw Error(Errc::UnsupportedKind,
                "twist is implemented for min-affine filtrations");
  std::vector<AffineForm> forms = f.forms();
  for (AffineForm& g : forms) {
    for (std::size_t i = 0; i < g.u.size(); ++i) g.u[i] += beta.form.u[i];
    g.c += beta.form.c;
  }
  return Filtration::min_affine(f.domain_ptr(), std::move(forms));
}

/// Tautological approximation: the filtration of (Y, rH) generated by the
/// degree-r weights of F.
inline Filtration approximate(const Filtration& f, int r) {
  if (r < 1) throw Error(Errc::ValidationError, "approximate needs r >= 1");
  std::map<IVec, Int> table;
  for (const IVec& a : f.domain().lattice_points(r))
    table[a] = f.lattice_weight(r, a);
  return Filtration::generated(f.domain(), r, std::move(table));
}

/// Weight shift by floor(s*k); keeps weights integral and changes Chow
/// weights by O(1/r) rounding only.
inline Filtration shift(const Filtration& f, const Rat& s) {
  if (s == 0) return f;
  auto impl = std::make_shared<Filtration::Impl>();
  impl->kind = Filtration::Kind::Shifted;
  impl->domain = f.domain_ptr();
  impl->base = f.impl_;
  impl->shift = s;
  return Filtration(std::move(impl));
}

/// Builds the blowup Okounkov body at a smooth torus-fixed corner: checks
/// unimodularity of the vertex cone, changes coordinates so the cone is the
/// standard orthant, and cuts the corner simplex out of the dilate mP.
inline BlowupBody blowup_body(std::shared_ptr<const LatticePolytope> p,
                              std::size_t vertex, int m) {
  const int n = p->dim();
  if (vertex >= p->vertices().size())
    throw Error(Errc::ValidationError, "blowup vertex index out of range");
  if (m < 1) throw Error(Errc::ValidationError, "blowup needs m >= 1");
  std::vector<IVec> edges = p->edge_directions_at(vertex);
  if (static_cast<int>(edges.size()) != n)
    throw Error(Errc::NonSmoothCorner,
                "vertex cone is not simplicial (" +
                    std::to_string(edges.size()) + " edges in dimension " +
                    std::to_string(n) + ")");
  QMat e(static_cast<std::size_t>(n), QVec(static_cast<std::size_t>(n)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      e[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          Rat(edges[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]);
  const Rat d = det(e);
  if (d != 1 && d != -1)
    throw Error(Errc::NonSmoothCorner,
                "vertex cone is not unimodular (index " +
                    rat_to_string(rat_abs(d)) + ")");

  BlowupBody b;
  b.base = p;
  b.corner = vertex;
  b.m = m;
  b.corner_vertex = p->vertices()[vertex];
  b.edges = std::move(edges);

  // P' = E^{-1}(P - v0); unimodularity keeps the vertices integral.
  std::vector<IVec> tverts;
  for (const IVec& v : p->vertices()) {
    QVec rhs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      rhs[static_cast<std::size_t>(i)] =
          Rat(v[static_cast<std::size_t>(i)] -
              b.corner_vertex[static_cast<std::size_t>(i)]);
    auto x = solve_linear(e, rhs);
    IVec iv(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const Rat& q = (*x)[static_cast<std::size_t>(i)];
      if (denominator(q) != 1)
        throw Error(Errc::NonSmoothCorner,
                    "coordinate change is not integral");
      iv[static_cast<std::size_t>(i)] = numerator(q);
    }
    tverts.push_back(std::move(iv));
  }
  b.transformed_base =
      std::make_shared<LatticePolytope>(n, std::move(tverts));

  // Containment of the corner simplex: e_i/m in P' for every i.
  for (int i = 0; i < n; ++i) {
    IVec ei(static_cast<std::size_t>(n), Int(0));
    ei[static_cast<std::size_t>(i)] = 1;
    if (!b.transformed_base->contains_scaled(ei, m))
      throw Error(Errc::SimplexNotContained,
                  "corner simplex of size 1/m is not contained in the "
                  "polytope");
  }

  Int m_pow_n = 1;
  for (int i = 0; i < n; ++i) m_pow_n *= m;
  const Rat vol_hat = Rat(m_pow_n) * p->volume() - Rat(1, factorial(n));
  if (vol_hat == 0)
    throw Error(Errc::SimplexNotContained,
                "blowup body is degenerate (volume 0)");

  std::vector<Halfspace> hs;
  for (const Halfspace& f : b.transformed_base->facets())
    hs.push_back(Halfspace{f.normal, f.offset * m});
  hs.push_back(Halfspace{IVec(static_cast<std::size_t>(n), Int(1)), Rat(1)});
  std::vector<IVec> hat_verts;
  for (const QVec& v : enumerate_vertices(hs, n)) {
    IVec iv(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (denominator(v[i]) != 1)
        throw Error(Errc::ValidationError,
                    "blowup body has a non-integral vertex");
      iv[i] = numerator(v[i]);
    }
    hat_verts.push_back(std::move(iv));
  }
  b.body = std::make_shared<LatticePolytope>(n, std::move(hat_verts));
  return b;
}

/// Filtration induced on sections vanishing to order >= k at the corner:
/// degree-k points are the lattice points of k*hat(P) and the weight is the
/// base weight in degree k*m, transported through the coordinate change.
inline Filtration blowup_filtration(const Filtration& f, const BlowupBody& b) {
  if (f.kind() != Filtration::Kind::MinAffine)
    throw Error(Errc::UnsupportedKind,
                "blowup_filtration needs a min-affine base");
  if (!(f.domain() == *b.base))
    throw Error(Errc::DomainMismatch,
                "filtration does not live on the blowup's base polytope");
  auto impl = std::make_shared<Filtration::Impl>();
  impl->kind = Filtration::Kind::Blowup;
  impl->domain = b.body;
  impl->base = f.impl_;
  impl->blow = std::make_shared<BlowupBody>(b);
  for (const AffineForm& g : f.forms())
    impl->forms.push_back(
        AffineForm{b.transform_slope(g.u), b.transform_constant(g)});
  return Filtration(std::move(impl));
}

/// Affine forms whose pointwise minimum is the concave transform G_F.
/// For a generated filtration this is the exact upper concave envelope of
/// its degree-one table (the limit of the superadditive closure).
inline std::vector<RatAffine> envelope_forms(const Filtration& f) {
  switch (f.kind()) {
    case Filtration::Kind::MinAffine: {
      std::vector<RatAffine> out;
      for (const AffineForm& g : f.forms()) out.push_back(g.limit_form());
      return out;
    }
    case Filtration::Kind::Shifted: {
      std::vector<RatAffine> out = envelope_forms(f.base());
      for (RatAffine& g : out) g.c -= f.shift_amount();
      return out;
    }
    case Filtration::Kind::Blowup: {
      // G_hat(x) = m * G(x/m) on the hat body.
      std::vector<RatAffine> out;
      const int m = f.blowup_data().m;
      for (const AffineForm& g : f.blowup_forms())
        out.push_back(RatAffine{to_qvec(g.u), Rat(g.c * m)});
      return out;
    }
    case Filtration::Kind::Generated: {
      std::vector<IVec> pts;
      std::vector<Int> vals;
      for (const auto& [a, v] : f.generated_table()) {
        pts.push_back(a);
        vals.push_back(v);
      }
      return upper_concave_envelope(pts, vals);
    }
  }
  throw Error(Errc::UnsupportedKind, "unreachable filtration kind");
}

/// Exact lower envelope on a common subdivision. Generated filtrations are
/// not representable here: their transform is a limit object and is exposed
/// only through sampled lower bounds.
inline PiecewiseAffine concave_transform(const Filtration& f) {
  if (f.kind() == Filtration::Kind::Generated)
    throw Error(Errc::NotRepresentable,
                "concave transform of a generated filtration is a limit "
                "object; sample lattice weights instead");
  PiecewiseAffine pw;
  pw.forms = envelope_forms(f);
  pw.domain_vertices = f.domain().qvertices();
  for (const Simplex& cell : subdivide_common(pw.domain_vertices, {pw.forms}))
    pw.pieces.emplace_back(pw.forms[active_form_index(pw.forms, cell)], cell);
  return pw;
}

/// { x in P : G_F(x) >= s } as P's facets plus one halfspace per form.
inline SuperlevelBody superlevel_body(const Filtration& f, const Rat& s) {
  SuperlevelBody body;
  body.halfspaces = f.domain().facets();
  for (const RatAffine& g : envelope_forms(f)) {
    bool zero_slope = true;
    for (const Rat& x : g.u) zero_slope = zero_slope && x == 0;
    if (zero_slope) {
      if (g.c < s) {
        // Constant form below the level: empty superlevel set.
        body.halfspaces.clear();
        body.vertices.clear();
        return body;
      }
      continue;
    }
    body.halfspaces.push_back(detail::canonical_halfspace(g.u, s - g.c));
  }
  body.vertices = enumerate_vertices(body.halfspaces, f.domain().dim());
  return body;
}

/// Exhaustive superadditivity check g_{k+l}(a+b) >= g_k(a) + g_l(b) for all
/// k, l <= max_k; a test helper mirroring the defining invariant.
inline bool check_superadditive(const Filtration& f, int max_k) {
  for (int k = 1; k <= max_k; ++k) {
    const auto pk = f.domain().lattice_points(k);
    for (int l = k; k + l <= 2 * max_k && l <= max_k; ++l) {
      const auto pl = (l == k) ? pk : f.domain().lattice_points(l);
      for (const IVec& a : pk)
        for (const IVec& b : pl) {
          IVec ab(a.size());
          for (std::size_t i = 0; i < a.size(); ++i) ab[i] = a[i] + b[i];
          if (f.lattice_weight(k + l, ab) <
              f.lattice_weight(k, a) + f.lattice_weight(l, b))
            return false;
        }
    }
  }
  return true;
}

/// Linear-boundedness constant: |g_k| <= C*k over kP.
inline Int linear_bound_constant(const Filtration& f) {
  switch (f.kind()) {
    case Filtration::Kind::MinAffine: {
      Int c = 0;
      for (const AffineForm& g : f.forms())
        for (const IVec& v : f.domain().vertices())
          c = std::max(c, int_abs(g.eval(v, 1)));
      return c;
    }
    case Filtration::Kind::Shifted:
      return linear_bound_constant(f.base()) +
             int_abs(rat_ceil(rat_abs(f.shift_amount())));
    case Filtration::Kind::Blowup: {
      Int c = 0;
      for (const AffineForm& g : f.blowup_forms())
        for (const IVec& v : f.domain().vertices())
          c = std::max(c, int_abs(g.eval(v, f.blowup_data().m)));
      return c;
    }
    case Filtration::Kind::Generated: {
      Int c = 0;
      for (const auto& [a, v] : f.generated_table())
        c = std::max(c, int_abs(v));
      return c;
    }
  }
  return 0;
}

/// Independent one-parameter subgroups spanning (a subtorus of) the maximal
/// torus; the Gram matrix of pairwise inner products is nonsingular.
class TorusBasis {
 public:
  TorusBasis(std::shared_ptr<const LatticePolytope> domain,
             std::vector<OneParamSubgroup> generators)
      : domain_(std::move(domain)), gens_(std::move(generators)) {
    const int n = domain_->dim();
    if (static_cast<int>(gens_.size()) > n)
      throw Error(Errc::ValidationError,
                  "torus rank exceeds the polytope dimension");
    QMat slopes;
    for (const OneParamSubgroup& g : gens_) {
      if (static_cast<int>(g.form.u.size()) != n)
        throw Error(Errc::ValidationError,
                    "torus generator arity != polytope dimension");
      slopes.push_back(to_qvec(g.form.u));
    }
    if (!gens_.empty() &&
        rank(std::move(slopes)) != static_cast<int>(gens_.size()))
      throw Error(Errc::ValidationError,
                  "torus generators have dependent slopes");
  }

  const LatticePolytope& domain() const { return *domain_; }
  std::shared_ptr<const LatticePolytope> domain_ptr() const { return domain_; }
  const std::vector<OneParamSubgroup>& generators() const { return gens_; }
  std::size_t rank_d() const { return gens_.size(); }

 private:
  std::shared_ptr<const LatticePolytope> domain_;
  std::vector<OneParamSubgroup> gens_;
};

}  // namespace kfiltr
