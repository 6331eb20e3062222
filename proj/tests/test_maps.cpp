#include "doctest.h"

#include "acim/errors.hpp"
#include "acim/maps.hpp"
#include "test_util.hpp"

using namespace acim;
using testutil::Rng;
using testutil::poly_surrogate;
using testutil::random_boxset;

TEST_SUITE_BEGIN("maps");

TEST_CASE("pointwise evaluation of the basic maps") {
  CircleMap dbl = CircleMap::doubling();
  CHECK(dbl.evaluate(frac(3, 10)) == frac(3, 5));
  CHECK(dbl.derivative(frac(3, 10)) == 2);
  CHECK(dbl.evaluate(frac(7, 10)) == frac(2, 5));  // wraps
  CircleMap id = CircleMap::rotation(Rat(0));
  CHECK(id.evaluate(frac(13, 64)) == frac(13, 64));
  CircleMap half = CircleMap::halving();
  CHECK(half.evaluate(Rat(1)) == frac(1, 2));
}

TEST_CASE("exact preimages") {
  CircleMap dbl = CircleMap::doubling();
  BoxSet s = BoxSet::segment(frac(1, 20), frac(7, 100));
  BoxSet p = preimage(dbl, s);
  REQUIRE(p.component_count() == 2);
  CHECK(p.segments()[0].lo == frac(1, 40));
  CHECK(p.segments()[0].hi == frac(7, 200));
  CHECK(p.segments()[1].lo == frac(21, 40));
  CHECK(p.segments()[1].hi == frac(107, 200));

  CHECK(preimage(dbl, BoxSet::empty()).is_empty());

  CircleMap tri = CircleMap::affine_expanding(3);
  BoxSet q = preimage(tri, BoxSet::segment(Rat(0), frac(1, 3)));
  REQUIRE(q.component_count() == 3);
  CHECK(q.segments()[0].lo == 0);
  CHECK(q.segments()[0].hi == frac(1, 9));
  CHECK(q.segments()[1].lo == frac(1, 3));
  CHECK(q.segments()[1].hi == frac(4, 9));
  CHECK(q.segments()[2].lo == frac(2, 3));
  CHECK(q.segments()[2].hi == frac(7, 9));
}

TEST_CASE("exact images with wrap") {
  CircleMap dbl = CircleMap::doubling();
  BoxSet s = BoxSet::segment(frac(1, 40), frac(7, 200));
  BoxSet im = image(dbl, s);
  REQUIRE(im.component_count() == 1);
  CHECK(im.segments()[0].lo == frac(1, 20));
  CHECK(im.segments()[0].hi == frac(7, 100));

  CircleMap id = CircleMap::rotation(Rat(0));
  BoxSet any = BoxSet::segment(frac(1, 5), frac(2, 5));
  CHECK(image(id, any) == any);

  BoxSet w = image(dbl, BoxSet::segment(frac(2, 5), frac(3, 5)));
  REQUIRE(w.component_count() == 2);
  CHECK(w.segments()[0].lo == 0);
  CHECK(w.segments()[0].hi == frac(1, 5));
  CHECK(w.segments()[1].lo == frac(4, 5));
  CHECK(w.segments()[1].hi == 1);
}

TEST_CASE("preimage/image duality and non-singularity on random sets") {
  Rng rng(31);
  for (const auto& f : {CircleMap::doubling(), CircleMap::affine_expanding(3)}) {
    Rat sigma = f.nonsingularity_constant();
    for (int t = 0; t < 40; ++t) {
      BoxSet s = random_boxset(rng);
      BoxSet pre = preimage(f, s);
      CHECK(contains_mod_null(preimage(f, image(f, s)), s));
      CHECK(contains_mod_null(s, image(f, pre)));
      CHECK(pre.measure() <= sigma * s.measure());
    }
  }
}

TEST_CASE("nonsingularity constant counts wrap windows") {
  CHECK(CircleMap::doubling().nonsingularity_constant() == 1);
  CHECK(CircleMap::affine_expanding(3).nonsingularity_constant() == 1);
  CHECK(CircleMap::halving().nonsingularity_constant() == 2);
}

TEST_CASE("periodic points") {
  CircleMap dbl = CircleMap::doubling();
  auto pts = find_periodic_points(dbl, 2);
  REQUIRE(pts.size() == 3);
  CHECK(pts[0] == 0);
  CHECK(pts[1] == frac(1, 3));
  CHECK(pts[2] == frac(2, 3));

  CircleMap tri = CircleMap::affine_expanding(3);
  auto fixed = find_periodic_points(tri, 1);
  REQUIRE(fixed.size() == 2);
  CHECK(fixed[0] == 0);
  CHECK(fixed[1] == frac(1, 2));

  CircleMap rot = CircleMap::rotation(frac(355, 113));
  CHECK(find_periodic_points(rot, 8).empty());

  CircleMap id = CircleMap::rotation(Rat(0));
  CHECK_THROWS_AS(find_periodic_points(id, 1), input_error);
}

TEST_CASE("derivative at break points") {
  // two branches with different slopes: x -> 2x on [0,1/2), 3x - 1/2 on [1/2,1)
  CircleMap f(
      {Branch{Rat(0), frac(1, 2), {Rat(0), Rat(2)}},
       Branch{frac(1, 2), Rat(1), {frac(-1, 2), Rat(3)}}},
      true);
  CHECK(f.derivative(frac(1, 4)) == 2);
  CHECK(f.derivative(frac(3, 4)) == 3);
  CHECK_THROWS_AS(f.derivative(frac(1, 2)), precondition_error);
}

TEST_CASE("bump profile: flat zones, shoulders, derivative budget") {
  Bump rho(frac(1, 4));
  CHECK(rho.value(frac(3, 4)) == 1);
  CHECK(rho.value(Rat(1)) == 0);
  CHECK(rho.value(frac(-3, 4)) == 1);
  CHECK(rho.derivative(frac(3, 4)) == 0);
  CHECK(rho.derivative(Rat(1)) == 0);
  CHECK(rho.value(frac(7, 8)) == frac(1, 2));  // midpoint of the shoulder
  Rat budget = rho.sup_derivative();
  CHECK(budget == Rat(6));
  CHECK(budget < 2 / rho.delta);
  for (int j = 1; j < 40; ++j) {
    Rat x = frac(3, 4) + frac(j, 160);
    CHECK(rat_abs(rho.derivative(x)) <= budget);
  }
}

TEST_CASE("compressor patch: gluing, flat-zone action, exact image") {
  CircleMap dbl = CircleMap::doubling();
  Rat c = frac(1, 4), R = frac(1, 32), kappa = frac(9, 10);
  Patch p{Patch::Kind::compress, c, R, Bump(frac(1, 4)),
          Rat(0), Rat(0), -1, kappa, Rat(0)};
  PatchedMap g(dbl, {p});
  // identity at the support boundary, value and derivative
  CHECK(g.evaluate(c + R) == dbl.evaluate(c + R));
  CHECK(g.evaluate(c - R) == dbl.evaluate(c - R));
  CHECK(g.derivative(c + R) == 2);
  // exact kappa-compression in the flat zone
  Rat t = frac(1, 100);
  CHECK(g.evaluate(c + t) == dbl.evaluate(c + kappa * t));
  CHECK(g.derivative(c + t) == 2 * kappa);
  // exact image of a segment through the patch
  BoxSet v = BoxSet::segment(c - t, c + t);
  BoxSet im = g.image(v);
  REQUIRE(im.component_count() == 1);
  CHECK(im.segments()[0].lo == dbl.evaluate(c - kappa * t));
  CHECK(im.segments()[0].hi == dbl.evaluate(c + kappa * t));
  // random membership sanity across the whole patch
  Rng rng(3);
  BoxSet sup = BoxSet::segment(c - R, c + R);
  BoxSet sup_im = g.image(sup);
  for (int j = 0; j < 50; ++j) {
    Rat x = c - R + frac(rng.uniform(4096), 4096) * (2 * R);
    CHECK(contains_point(sup_im, {g.evaluate(x)}));
  }
}

TEST_CASE("linearize patch glues to the base map") {
  CircleMap f = poly_surrogate();
  Rat c = frac(5, 16), R = frac(1, 64);
  const Branch& br = f.branches()[0];
  Patch p{Patch::Kind::linearize, c, R, Bump(frac(1, 4)),
          br.eval_raw(c), br.deriv_raw(c), 0, Rat(1), Rat(0)};
  PatchedMap ft(f, {p});
  CHECK(ft.evaluate(c + R) == f.evaluate(c + R));
  CHECK(ft.derivative(c + R) == f.derivative(c + R));
  CHECK(ft.evaluate(c - R) == f.evaluate(c - R));
  // exactly affine at the center zone
  Rat h = R / 8;
  CHECK(ft.evaluate(c + h) - ft.evaluate(c - h) == br.deriv_raw(c) * 2 * h);
}

TEST_CASE("derivative matches central differences on smooth pieces") {
  CircleMap f = poly_surrogate();
  for (int j = 1; j < 24; ++j) {
    double x = j / 25.0;
    if (std::fabs(x - 0.5) < 0.05) continue;
    double h = 1e-5;
    double fd = (f.evaluate_d(x + h) - f.evaluate_d(x - h)) / (2 * h);
    if (std::fabs(fd) > 10) continue;  // wrapped across the seam
    CHECK(std::fabs(fd - f.derivative_d(x)) < 1e-6);
  }
}

TEST_CASE("c1 distances") {
  PatchedMap f(CircleMap::doubling());
  PatchedMap g(CircleMap::doubling());
  CHECK(c1_distance_lower(f, g, 256) == 0);
  CHECK(c1_distance_bound(f, g) == 0);

  // doubling shifted by a constant
  Rat c = frac(1, 50);
  PatchedMap gs(CircleMap({Branch{Rat(0), Rat(1), {c, Rat(2)}}}, true));
  CHECK(c1_distance_lower(f, gs, 128) == c);
  CHECK(c1_distance_bound(f, gs) == c);

  // compressor patch against its own base: the closed-form budget
  Rat kappa = frac(91, 100);
  Patch p{Patch::Kind::compress, frac(1, 2), Rat(1), Bump(frac(1, 2)),
          Rat(0), Rat(0), -1, kappa, Rat(0)};
  p.c1_bound = (1 - kappa) * (p.radius + 1 + 3 / (2 * p.bump.delta));
  CHECK(p.c1_bound == frac(9, 20));  // exactly (1-kappa)(1 + 2/delta) here
  CHECK(p.c1_bound <= (1 - kappa) * (1 + 2 / p.bump.delta));
}

TEST_CASE("map json round trip") {
  CircleMap f = poly_surrogate();
  CircleMap f2 = CircleMap::from_json(f.to_json());
  CHECK(f2.evaluate(frac(1, 3)) == f.evaluate(frac(1, 3)));
  Patch p{Patch::Kind::compress, frac(1, 4), frac(1, 32), Bump(frac(1, 4)),
          Rat(0), Rat(0), -1, frac(9, 10), frac(1, 2)};
  PatchedMap g(CircleMap::doubling(), {p});
  PatchedMap g2 = PatchedMap::from_json(g.to_json());
  CHECK(g2.evaluate(frac(1, 4) + frac(1, 100)) ==
        g.evaluate(frac(1, 4) + frac(1, 100)));
  CHECK(g2.c1_bound_to_base() == g.c1_bound_to_base());
}

TEST_SUITE_END();
