#include "doctest.h"

#include "acim/errors.hpp"
#include "acim/geometry.hpp"
#include "test_util.hpp"

using namespace acim;
using testutil::Rng;
using testutil::random_boxset;
using testutil::random_boxset_2d;

TEST_SUITE_BEGIN("geometry");

TEST_CASE("union merges adjacent and overlapping segments") {
  BoxSet a = BoxSet::segment(Rat(0), frac(1, 2));
  BoxSet b = BoxSet::segment(frac(1, 2), Rat(1));
  BoxSet u = box_union(a, b);
  CHECK(u.component_count() == 1);
  CHECK(u.measure() == 1);

  CHECK(box_union(a, BoxSet::empty()) == a);

  BoxSet c = box_union(BoxSet::segment(Rat(0), frac(3, 10)),
                       BoxSet::segment(frac(1, 5), frac(1, 2)));
  CHECK(c.component_count() == 1);
  CHECK(c.measure() == frac(1, 2));
}

TEST_CASE("subtract and intersect on the worked examples") {
  BoxSet d = subtract(BoxSet::unit(), BoxSet::segment(frac(1, 3), frac(2, 3)));
  REQUIRE(d.component_count() == 2);
  CHECK(d.segments()[0].lo == 0);
  CHECK(d.segments()[0].hi == frac(1, 3));
  CHECK(d.segments()[1].lo == frac(2, 3));
  CHECK(d.measure() == frac(2, 3));

  BoxSet a = box_union(BoxSet::segment(Rat(0), frac(1, 4)),
                       BoxSet::segment(frac(1, 2), Rat(1)));
  CHECK(intersect(a, a) == a);

  BoxSet m = intersect(a, BoxSet::segment(frac(1, 8), frac(5, 8)));
  REQUIRE(m.component_count() == 2);
  CHECK(m.segments()[0].lo == frac(1, 8));
  CHECK(m.segments()[0].hi == frac(1, 4));
  CHECK(m.segments()[1].lo == frac(1, 2));
  CHECK(m.segments()[1].hi == frac(5, 8));
  CHECK(m.measure() == frac(1, 4));
}

TEST_CASE("measure basics") {
  CHECK(BoxSet::empty().measure() == 0);
  CHECK(BoxSet::unit().measure() == 1);
  CHECK(BoxSet::unit(3).measure() == 1);
  BoxSet s = box_union(BoxSet::segment(frac(1, 20), frac(7, 100)),
                       BoxSet::segment(frac(21, 40), frac(107, 200)));
  CHECK(s.measure() == frac(3, 100));
}

TEST_CASE("complement in the unit box") {
  BoxSet a = BoxSet::segment(frac(1, 4), frac(3, 4));
  BoxSet c = complement_in_unit(a);
  CHECK(c.measure() == frac(1, 2));
  CHECK(intersection_measure(a, c) == 0);
  CHECK_THROWS_AS(complement_in_unit(BoxSet::segment(frac(-1, 2), frac(1, 2))),
                  input_error);
}

TEST_CASE("inclusion-exclusion holds exactly on random pairs") {
  Rng rng(7);
  for (int t = 0; t < 200; ++t) {
    BoxSet a = random_boxset(rng);
    BoxSet b = random_boxset(rng);
    CHECK(box_union(a, b).measure() + intersect(a, b).measure() ==
          a.measure() + b.measure());
    // difference measure identity
    CHECK(subtract(box_union(a, b), b).measure() ==
          a.measure() - intersect(a, b).measure());
    CHECK(intersection_measure(a, b) == intersect(a, b).measure());
  }
}

TEST_CASE("inclusion-exclusion in dimension 2") {
  Rng rng(19);
  for (int t = 0; t < 60; ++t) {
    BoxSet a = random_boxset_2d(rng);
    BoxSet b = random_boxset_2d(rng);
    CHECK(box_union(a, b).measure() + intersect(a, b).measure() ==
          a.measure() + b.measure());
    CHECK(subtract(a, b).measure() == a.measure() - intersect(a, b).measure());
  }
  BoxSet u = BoxSet::unit(2);
  BoxSet q = BoxSet::from_boxes(
      2, {Box{Interval{Rat(0), frac(1, 2)}, Interval{Rat(0), frac(1, 2)}}});
  CHECK(complement_in_unit(q).measure() == frac(3, 4));
  CHECK(intersect(u, q) == q);
}

TEST_CASE("canonicalization is idempotent and measure-preserving") {
  Rng rng(23);
  for (int t = 0; t < 50; ++t) {
    BoxSet a = random_boxset(rng, 8, 6);
    BoxSet again = BoxSet::from_boxes(1, a.boxes());
    CHECK(again == a);
    // rebuilding from scrambled overlapping pieces keeps the measure
    std::vector<Box> pieces = a.boxes();
    std::vector<Box> doubled = pieces;
    for (const auto& p : pieces) doubled.push_back(p);
    CHECK(BoxSet::from_boxes(1, doubled).measure() == a.measure());
  }
}

TEST_CASE("measure agrees with a grid-counting oracle on 1000 random sets") {
  Rng rng(101);
  const long G = 1024;
  for (int t = 0; t < 1000; ++t) {
    BoxSet a = random_boxset(rng, 5, 9);
    long cnt = 0;
    for (long j = 0; j < G; ++j) {
      std::vector<Rat> center{frac(2 * j + 1, 2 * G)};
      if (contains_point(a, center)) ++cnt;
    }
    Rat err = rat_abs(a.measure() - frac(cnt, G));
    CHECK(err <= frac((long)a.component_count() + 1, G));
  }
}

TEST_CASE("gaps and containment") {
  BoxSet a = BoxSet::segment(Rat(0), frac(1, 4));
  BoxSet b = BoxSet::segment(frac(1, 2), Rat(1));
  Rat g;
  REQUIRE(min_gap(a, b, g));
  CHECK(g == frac(1, 4));
  CHECK(contains_mod_null(box_union(a, b), a));
  CHECK(!contains_mod_null(a, b));
  BoxSet touching = BoxSet::segment(frac(1, 4), frac(1, 2));
  REQUIRE(min_gap(a, touching, g));
  CHECK(g == 0);
  CHECK(interiors_disjoint(a, touching));
}

TEST_CASE("json round trip") {
  Rng rng(5);
  for (int t = 0; t < 10; ++t) {
    BoxSet a = random_boxset(rng);
    CHECK(boxset_from_json(boxset_to_json(a)) == a);
  }
  BoxSet q = BoxSet::from_boxes(
      2, {Box{Interval{frac(1, 3), frac(2, 3)}, Interval{Rat(0), frac(1, 7)}}});
  CHECK(boxset_from_json(boxset_to_json(q)) == q);
}

TEST_SUITE_END();
