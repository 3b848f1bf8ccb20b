#include <catch2/catch_amalgamated.hpp>

#include "kfiltr/filtration.hpp"
#include "test_helpers.hpp"

using namespace kfiltr;
using namespace kfiltr::testing;

TEST_CASE("one-parameter filtrations") {
  SECTION("identity form on the segment") {
    auto f = Filtration::from_one_param(
        OneParamSubgroup{make_form({1}, 0)}, segment());
    for (long long k = 1; k <= 4; ++k)
      for (long long a = 0; a <= k; ++a)
        REQUIRE(f.lattice_weight(k, ipoint({a})) == a);
  }
  SECTION("slope (1,0) on the simplex") {
    auto f = Filtration::from_one_param(
        OneParamSubgroup{make_form({1, 0}, 0)}, simplex2());
    REQUIRE(f.lattice_weight(2, ipoint({1, 1})) == 1);
  }
  SECTION("constant c = 5 weighs 5k everywhere") {
    auto f = Filtration::from_one_param(
        OneParamSubgroup{make_form({0}, 5)}, segment());
    for (long long k = 1; k <= 3; ++k)
      for (long long a = 0; a <= k; ++a)
        REQUIRE(f.lattice_weight(k, ipoint({a})) == 5 * k);
  }
}

TEST_CASE("lattice weights") {
  auto tent = tent_filtration(segment());
  SECTION("tent at degree 4") {
    REQUIRE(tent.lattice_weight(4, ipoint({1})) == 1);
    REQUIRE(tent.lattice_weight(4, ipoint({2})) == 2);
    REQUIRE(tent.lattice_weight(4, ipoint({3})) == 1);
  }
  SECTION("vertex with a unique minimizing form") {
    REQUIRE(tent.lattice_weight(1, ipoint({0})) == 0);
  }
  SECTION("shifted weights subtract floor(s k)") {
    auto half = shift(tent, Rat(1, 2));
    REQUIRE(half.lattice_weight(4, ipoint({1})) == -1);
    REQUIRE(half.lattice_weight(3, ipoint({1})) == 0);  // floor(3/2) = 1
  }
  SECTION("points outside kP are rejected") {
    try {
      tent.lattice_weight(2, ipoint({3}));
      FAIL("expected OutOfBody");
    } catch (const Error& e) {
      REQUIRE(e.code() == Errc::OutOfBody);
    }
  }
}

TEST_CASE("concave transform") {
  SECTION("tent envelope") {
    auto pw = concave_transform(tent_filtration(segment()));
    REQUIRE(pw.forms.size() == 2);
    REQUIRE(pw.pieces.size() == 2);
    REQUIRE(pw.value({Rat(1, 2)}) == Rat(1, 2));
    REQUIRE(pw.value({Rat(1, 4)}) == Rat(1, 4));
  }
  SECTION("single form is affine everywhere") {
    auto f = Filtration::from_one_param(
        OneParamSubgroup{make_form({2, -1}, 3)}, square());
    auto pw = concave_transform(f);
    REQUIRE(pw.value({Rat(1, 3), Rat(1, 7)}) ==
            Rat(2) / 3 - Rat(1, 7) + 3);
  }
  SECTION("blowup transform obeys G_hat(x) = m G(x/m)") {
    auto tent = tent_filtration(segment());
    auto hat = blowup_filtration(tent, blowup_body(segment(), 0, 2));
    auto pw = concave_transform(hat);
    REQUIRE(pw.value({Rat(3, 2)}) == Rat(1, 2));
    REQUIRE(pw.value({Rat(1)}) == 1);
    REQUIRE(pw.value({Rat(2)}) == 0);
  }
  SECTION("generated filtrations have no exact envelope surface") {
    auto app = approximate(tent_filtration(segment()), 2);
    REQUIRE_THROWS_AS(concave_transform(app), Error);
    try {
      concave_transform(app);
    } catch (const Error& e) {
      REQUIRE(e.code() == Errc::NotRepresentable);
    }
  }
}

TEST_CASE("twists") {
  auto tent = tent_filtration(segment());
  const OneParamSubgroup beta{make_form({1}, 0)};
  SECTION("form translation") {
    auto tw = twist(tent, beta);
    REQUIRE(tw.forms()[0] == make_form({2}, 0));
    REQUIRE(tw.forms()[1] == make_form({0}, 1));
  }
  SECTION("zero twist is the identity") {
    REQUIRE(twist(tent, OneParamSubgroup{make_form({0}, 0)}) == tent);
  }
  SECTION("twisting back cancels") {
    REQUIRE(twist(twist(tent, beta), beta.negated()) == tent);
  }
  SECTION("pointwise additivity") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
      auto p = trial % 2 ? simplex2() : square();
      auto f = random_min_affine(rng, p);
      auto b = random_subgroup(rng, 2);
      auto tw = twist(f, b);
      for (int k = 1; k <= 5; ++k)
        for (const IVec& a : p->lattice_points(k))
          REQUIRE(tw.lattice_weight(k, a) ==
                  f.lattice_weight(k, a) + b.form.eval(a, k));
    }
  }
  SECTION("only min-affine filtrations can be twisted") {
    auto app = approximate(tent, 2);
    REQUIRE_THROWS_AS(twist(app, beta), Error);
  }
}

TEST_CASE("tautological approximation") {
  auto tent = tent_filtration(segment());
  SECTION("degree-2 table and closure") {
    auto app = approximate(tent, 2);
    REQUIRE(app.generated_table().size() == 3);
    REQUIRE(app.generated_table().at(ipoint({0})) == 0);
    REQUIRE(app.generated_table().at(ipoint({1})) == 1);
    REQUIRE(app.generated_table().at(ipoint({2})) == 0);
    // Original degree 4 = generated degree 2; max over decompositions.
    REQUIRE(app.lattice_weight(2, ipoint({2})) == 2);
    REQUIRE(app.lattice_weight(2, ipoint({1})) == 1);
  }
  SECTION("linear forms regenerate exactly at every level") {
    auto f = Filtration::from_one_param(
        OneParamSubgroup{make_form({1, 1}, 1)}, simplex2());
    auto app = approximate(f, 2);
    for (int k = 1; k <= 3; ++k)
      for (const IVec& a : app.domain().lattice_points(k))
        REQUIRE(app.lattice_weight(k, a) == f.lattice_weight(2 * k, a));
  }
  SECTION("level 1 is the table itself") {
    auto app = approximate(tent, 3);
    for (const IVec& a : app.domain().lattice_points(1))
      REQUIRE(app.lattice_weight(1, a) == tent.lattice_weight(3, a));
  }
  SECTION("closure never exceeds the original weights") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 6; ++trial) {
      auto f = random_min_affine(rng, simplex2());
      auto app = approximate(f, 2);
      for (int k = 1; k <= 4; ++k)
        for (const IVec& a : app.domain().lattice_points(k))
          REQUIRE(app.lattice_weight(k, a) <= f.lattice_weight(2 * k, a));
    }
  }
  SECTION("filtrations generated in degree one regenerate exactly") {
    // min(x, k) on [0,2] has an integral breakpoint, so its degree-one
    // table already generates every level.
    auto stair = Filtration::min_affine(
        segment2(), {make_form({1}, 0), make_form({0}, 1)});
    auto app = approximate(stair, 1);
    for (int k = 1; k <= 6; ++k)
      for (const IVec& a : app.domain().lattice_points(k))
        REQUIRE(app.lattice_weight(k, a) == stair.lattice_weight(k, a));
  }
}

TEST_CASE("shift") {
  auto tent = tent_filtration(segment());
  SECTION("zero shift is the identity") {
    REQUIRE(shift(tent, Rat(0)) == tent);
  }
  SECTION("mean shift kills the leading coefficient") {
    // b0(tent) = 1/4 on a domain of volume 1.
    auto sh = shift(tent, Rat(1, 4));
    std::vector<RatAffine> env = envelope_forms(sh);
    Rat b0 = integrate_envelope(sh.domain().qvertices(), env);
    REQUIRE(b0 == 0);
  }
  SECTION("shift and unshift agree on integral multiples") {
    auto back = shift(shift(tent, Rat(1, 2)), Rat(-1, 2));
    const auto seg = segment();
    for (int k = 2; k <= 6; k += 2)
      for (const IVec& a : seg->lattice_points(k))
        REQUIRE(back.lattice_weight(k, a) == tent.lattice_weight(k, a));
    // Odd degrees pick up the floor rounding.
    REQUIRE(back.lattice_weight(1, ipoint({0})) ==
            tent.lattice_weight(1, ipoint({0})) + 1);
  }
}

TEST_CASE("blowup bodies") {
  SECTION("square at the origin, m = 2") {
    auto body = blowup_body(square(), 0, 2);
    REQUIRE(body.volume() == Rat(7, 2));
  }
  SECTION("segment vertex 0, m = 3 gives [1,3]") {
    auto body = blowup_body(segment(), 0, 3);
    REQUIRE(body.volume() == 2);
    REQUIRE(body.body->vertices().front() == ipoint({1}));
    REQUIRE(body.body->vertices().back() == ipoint({3}));
  }
  SECTION("degenerate cut is rejected") {
    try {
      blowup_body(simplex2(), 0, 1);
      FAIL("expected SimplexNotContained");
    } catch (const Error& e) {
      REQUIRE(e.code() == Errc::SimplexNotContained);
    }
  }
  SECTION("non-unimodular corner is rejected") {
    auto p = make_polytope(2, {{0, 0}, {2, 1}, {1, 2}});
    try {
      blowup_body(p, 0, 2);
      FAIL("expected NonSmoothCorner");
    } catch (const Error& e) {
      REQUIRE(e.code() == Errc::NonSmoothCorner);
    }
  }
  SECTION("non-origin corner uses the unimodular change of coordinates") {
    auto body = blowup_body(square(), 3, 2);  // vertex (1,1)
    REQUIRE(body.volume() == Rat(7, 2));
  }
  SECTION("cube corner, m = 2") {
    auto body = blowup_body(cube3(), 0, 2);
    REQUIRE(body.volume() == Rat(8) - Rat(1, 6));
    // Degree one drops exactly the origin from the 3x3x3 grid.
    REQUIRE(body.body->lattice_points(1).size() == 26);
  }
}

TEST_CASE("blowup filtrations") {
  auto tent = tent_filtration(segment());
  SECTION("degree-1 sections of the segment blowup") {
    auto hat = blowup_filtration(tent, blowup_body(segment(), 0, 2));
    const auto& pts = hat.domain().lattice_points(1);
    REQUIRE(pts.size() == 2);
    REQUIRE(hat.lattice_weight(1, ipoint({1})) == 1);
    REQUIRE(hat.lattice_weight(1, ipoint({2})) == 0);
  }
  SECTION("zero filtration blows up to zero") {
    auto zero = Filtration::min_affine(square(), {make_form({0, 0}, 0)});
    auto hat = blowup_filtration(zero, blowup_body(square(), 0, 2));
    for (const IVec& a : hat.domain().lattice_points(2))
      REQUIRE(hat.lattice_weight(2, a) == 0);
  }
  SECTION("square blowup drops exactly the origin in degree 1") {
    auto roof = Filtration::min_affine(
        square(), {make_form({1, 0}, 0), make_form({-1, 0}, 1)});
    auto hat = blowup_filtration(roof, blowup_body(square(), 0, 2));
    REQUIRE(hat.domain().lattice_points(1).size() == 8);
  }
  SECTION("non-min-affine bases are rejected") {
    auto app = approximate(tent, 2);
    REQUIRE_THROWS_AS(
        blowup_filtration(app, blowup_body(app.domain_ptr(), 0, 2)), Error);
  }
}

TEST_CASE("superlevel bodies") {
  auto tent = tent_filtration(segment());
  SECTION("tent at level 1/4") {
    auto body = superlevel_body(tent, Rat(1, 4));
    REQUIRE(body.vertices.size() == 2);
    REQUIRE(body.vertices.front()[0] == Rat(1, 4));
    REQUIRE(body.vertices.back()[0] == Rat(3, 4));
  }
  SECTION("below the minimum: all of P") {
    auto body = superlevel_body(tent, Rat(-1));
    REQUIRE(body.vertices.size() == 2);
    REQUIRE(body.contains({Rat(0)}));
    REQUIRE(body.contains({Rat(1)}));
  }
  SECTION("above e_max: empty") {
    REQUIRE(superlevel_body(tent, Rat(2, 3)).empty());
  }
  SECTION("monotone decreasing in the level") {
    std::mt19937 rng(23);
    auto f = random_min_affine(rng, simplex2());
    const std::vector<Rat> levels = {Rat(-2), Rat(-1), Rat(0), Rat(1, 2),
                                     Rat(1)};
    for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
      auto larger = superlevel_body(f, levels[i]);
      auto smaller = superlevel_body(f, levels[i + 1]);
      for (const QVec& v : smaller.vertices) REQUIRE(larger.contains(v));
    }
  }
}

TEST_CASE("superadditivity and linear bounds") {
  std::mt19937 rng(31);
  std::vector<Filtration> samples = {
      tent_filtration(segment()),
      approximate(tent_filtration(segment()), 2),
      blowup_filtration(tent_filtration(segment()),
                        blowup_body(segment(), 0, 2)),
      random_min_affine(rng, simplex2()),
      random_min_affine(rng, square()),
  };
  for (const Filtration& f : samples) {
    REQUIRE(check_superadditive(f, 4));
    const Int c = linear_bound_constant(f);
    for (int k = 1; k <= 4; ++k)
      for (const IVec& a : f.domain().lattice_points(k))
        REQUIRE(int_abs(f.lattice_weight(k, a)) <= c * k);
  }
  // Integral floor rounding costs shifted filtrations at most one unit of
  // superadditivity at fractional s*k; exact on integral degrees.
  auto half = shift(tent_filtration(segment()), Rat(1, 2));
  const auto seg = segment();
  for (int k = 1; k <= 4; ++k)
    for (int l = k; l <= 4; ++l)
      for (const IVec& a : seg->lattice_points(k))
        for (const IVec& b : seg->lattice_points(l)) {
          IVec ab{a[0] + b[0]};
          const Int defect = half.lattice_weight(k, a) +
                             half.lattice_weight(l, b) -
                             half.lattice_weight(k + l, ab);
          REQUIRE(defect <= 1);
          if (k % 2 == 0 && l % 2 == 0) REQUIRE(defect <= 0);
        }
  REQUIRE(check_superadditive(shift(tent_filtration(segment()), Rat(2)), 4));
}

TEST_CASE("torus bases") {
  SECTION("independent generators pass") {
    TorusBasis t(square(), {OneParamSubgroup{make_form({1, 0}, 0)},
                            OneParamSubgroup{make_form({0, 1}, 0)}});
    REQUIRE(t.rank_d() == 2);
  }
  SECTION("dependent slopes are rejected") {
    REQUIRE_THROWS_AS(
        TorusBasis(square(), {OneParamSubgroup{make_form({1, 1}, 0)},
                              OneParamSubgroup{make_form({2, 2}, 5)}}),
        Error);
  }
  SECTION("rank cannot exceed the dimension") {
    REQUIRE_THROWS_AS(
        TorusBasis(segment(), {OneParamSubgroup{make_form({1}, 0)},
                               OneParamSubgroup{make_form({2}, 0)}}),
        Error);
  }
}
