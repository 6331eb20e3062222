#include "doctest.h"

#include "acim/errors.hpp"
#include "acim/rokhlin.hpp"
#include "test_util.hpp"

using namespace acim;
using testutil::Rng;

namespace {

// random small N-good dyadic interval for f (rejection sampling)
bool random_good_interval(Rng& rng, const CircleMap& f, int N, BoxSet& out) {
  for (int tries = 0; tries < 200; ++tries) {
    long den = 1L << (7 + rng.uniform(3));
    long a = rng.uniform(den - 1);
    BoxSet z = BoxSet::segment(frac(a, den), frac(a + 1, den));
    if (!check_n_good(f, z, N)) {
      out = z;
      return true;
    }
  }
  return false;
}

}  // namespace

TEST_SUITE_BEGIN("rokhlin");

TEST_CASE("goodness checks on the worked examples") {
  CircleMap dbl = CircleMap::doubling();
  CHECK(!check_n_good(dbl, BoxSet::segment(frac(1, 20), frac(7, 100)), 3));
  CHECK(!check_n_good(dbl, BoxSet::empty(), 5));
  auto bad = check_n_good(dbl, BoxSet::segment(Rat(0), frac(1, 10)), 2);
  REQUIRE(bad.has_value());
  CHECK(bad->index == 1);
  CHECK(bad->witness.lo >= 0);
  CHECK(bad->witness.hi <= frac(1, 10));
}

TEST_CASE("truncated hats: recurrence, monotonicity, tail bounds") {
  CircleMap dbl = CircleMap::doubling();
  BoxSet z = BoxSet::segment(frac(9, 64), frac(11, 64));
  BoxSet h4 = hat_truncated(dbl, z, 4);
  BoxSet h6 = hat_truncated(dbl, z, 6);
  CHECK(contains_mod_null(h6, h4));
  CHECK(h4.measure() <= h6.measure());
  // explicit: hat_1 = z union preimage(z)
  BoxSet h1 = hat_truncated(dbl, z, 1);
  CHECK(h1 == box_union(z, preimage(dbl, z)));
  // doubling preserves measure: no geometric tail bound available
  CHECK(!hat_tail_bound(dbl, z, 6).has_value());
}

TEST_CASE("merge of good sets: degenerate and generic cases") {
  CircleMap dbl = CircleMap::doubling();
  GoodSet A{BoxSet::segment(frac(1, 20), frac(7, 100)), 2};

  SUBCASE("A merged with itself returns A") {
    MergeResult r = merge_good(dbl, A, A, 12);
    CHECK(r.merged.Z == A.Z);
    CHECK(r.hat_deficit == 0);
  }

  SUBCASE("disjoint sets with disjoint shallow hats merge to the union") {
    RokhlinConfig cfg;
    cfg.merge_hat_depth = 2;
    GoodSet B{BoxSet::segment(frac(77, 256), frac(78, 256)), 2};
    BoxSet hatA = hat_truncated(dbl, A.Z, 2);
    BoxSet hatB = hat_truncated(dbl, B.Z, 2);
    REQUIRE(intersection_measure(hatA, B.Z) == 0);
    REQUIRE(intersection_measure(hatB, A.Z) == 0);
    MergeResult r = merge_good(dbl, A, B, 2, cfg);
    CHECK(r.merged.Z == box_union(A.Z, B.Z));
  }

  SUBCASE("doubling example from the construction") {
    GoodSet B{BoxSet::segment(frac(13, 50), frac(27, 100)), 2};
    REQUIRE(!check_n_good(dbl, B.Z, 2));
    MergeResult r = merge_good(dbl, A, B, 12);
    CHECK(!check_n_good(dbl, r.merged.Z, 2));
    // depth-12 hat contains A and B up to the recorded deficit
    BoxSet hatC = hat_truncated(dbl, r.merged.Z, 12);
    BoxSet ab = box_union(A.Z, B.Z);
    CHECK(ab.measure() - intersection_measure(ab, hatC) == r.hat_deficit);
    CHECK(r.hat_deficit <= frac(1, 10000));
  }
}

TEST_CASE("merged output stays good on 100 random pairs") {
  Rng rng(11);
  RokhlinConfig cfg;
  cfg.merge_hat_depth = 6;
  int done = 0;
  for (const auto& f : {CircleMap::doubling(), CircleMap::affine_expanding(3)}) {
    for (int t = 0; t < 50; ++t) {
      int N = 2 + (int)rng.uniform(3);
      BoxSet a, b;
      REQUIRE(random_good_interval(rng, f, N, a));
      REQUIRE(random_good_interval(rng, f, N, b));
      MergeResult r = merge_good(f, GoodSet{a, N}, GoodSet{b, N}, 6, cfg);
      CHECK(!check_n_good(f, r.merged.Z, N));
      CHECK(r.hat_deficit >= 0);
      ++done;
    }
  }
  CHECK(done == 100);
}

TEST_CASE("saturated covers") {
  CircleMap dbl = CircleMap::doubling();

  SUBCASE("N = 1: the constraint is vacuous and everything qualifies") {
    CoverResult c = cover_good_saturated(dbl, 1, frac(1, 10));
    CHECK(c.covered > frac(9, 10));
    for (const auto& p : c.pieces) CHECK(!check_n_good(dbl, p.Z, 1));
  }

  SUBCASE("N = 2 avoids the low-period points") {
    CoverResult c = cover_good_saturated(dbl, 2, frac(1, 4));
    CHECK(c.covered > frac(3, 4));
    CHECK(c.excluded_points.size() == 3);  // 0, 1/3, 2/3
    for (const auto& p : c.pieces) {
      CHECK(!check_n_good(dbl, p.Z, 2));
      // saturation: pieces are full f^-2 pullbacks
      BoxSet fwd = p.Z;
      for (int i = 0; i < 2; ++i) fwd = image(dbl, fwd);
      BoxSet back = fwd;
      for (int i = 0; i < 2; ++i) back = preimage(dbl, back);
      CHECK(back.measure() == p.Z.measure());
    }
  }

  SUBCASE("non-expanding maps are rejected") {
    CHECK_THROWS_AS(cover_good_saturated(CircleMap::rotation(frac(355, 113)),
                                         2, frac(1, 4)),
                    precondition_error);
  }
}

TEST_CASE("small set with a large truncated hat") {
  CircleMap dbl = CircleMap::doubling();
  VResult v = build_V(dbl, 3, frac(1, 2), 12);
  CHECK(v.V.Z.measure() <= frac(1, 3));
  CHECK(!check_n_good(dbl, v.V.Z, 3));
  CHECK(v.hat_measure > frac(1, 2));
  // doubling preserves measure, so goodness already forces m(W) <= 1/N and
  // the first pigeonhole index wins
  CHECK(v.image_index == 0);
  CHECK_THROWS_AS(build_V(dbl, 3, frac(1, 4), 12), precondition_error);
}

TEST_CASE("tower construction and its exact ledger") {
  CircleMap dbl = CircleMap::doubling();

  SUBCASE("height 4 with relaxed tolerance") {
    Tower t = build_tower(dbl, 4, 1, frac(3, 5), 14);
    CHECK(t.disjoint_ok);
    CHECK(!check_n_good(dbl, t.U, 4));
    CHECK(t.level_measures.size() == 4);
    Rat fill(0);
    for (const auto& m : t.level_measures) fill += m;
    CHECK(fill == t.fill);
    CHECK(t.fill_ok == (t.fill > 1 - t.eps0));
    CHECK(t.low_ok == (t.low_sum < frac(1, 4) + t.eps0));
    CHECK(t.low_sum == t.level_measures[0]);
    CHECK(t.S.size() == 4);
    CHECK(t.S[t.j0] <= frac(1, 4));
    // star masses are a partition of the truncated hat
    Rat star_sum(0);
    for (const auto& p : t.star_measures) star_sum += p;
    CHECK(star_sum == t.V_hat_measure);
  }

  SUBCASE("degenerate height 1") {
    Tower t = build_tower(dbl, 1, 1, frac(2, 5), 12);
    CHECK(t.disjoint_ok);
    CHECK(t.fill == t.level_measures[0]);
    CHECK(t.fill_ok);          // m(U) = m(hat V) - m(V) is large
    CHECK(t.low_ok);           // bound reads m(U) < 1 + eps0: vacuous
  }

  SUBCASE("l = n0 makes the second inequality vacuous") {
    Tower t = build_tower(dbl, 2, 2, frac(3, 5), 10);
    CHECK(t.low_ok);
    CHECK(t.low_sum < 1 + t.eps0);
  }

  SUBCASE("input validation") {
    CHECK_THROWS_AS(build_tower(dbl, 2, 3, frac(1, 10), 12), input_error);
    CHECK_THROWS_AS(build_tower(dbl, 4, 1, frac(1, 10), 3), input_error);
    CHECK_THROWS_AS(build_tower(CircleMap::rotation(frac(1, 7)), 2, 1,
                                frac(1, 10), 8),
                    precondition_error);
  }
}

TEST_CASE("first-entry nesting: preimages of stars contain deeper stars") {
  CircleMap dbl = CircleMap::doubling();
  Tower t = build_tower(dbl, 3, 1, frac(3, 5), 9);
  // rebuild the stars from V and spot-check f^-j(V_i*) contains V_{i+j}*
  std::vector<BoxSet> stars{t.V};
  for (int s = 1; s <= t.T; ++s)
    stars.push_back(subtract(preimage(dbl, stars.back()), t.V));
  for (int s = 0; s <= t.T; ++s) CHECK(stars[s].measure() == t.star_measures[s]);
  for (int i : {1, 3}) {
    for (int j : {1, 2}) {
      BoxSet pre = stars[i];
      for (int r = 0; r < j; ++r) pre = preimage(dbl, pre);
      CHECK(contains_mod_null(pre, stars[i + j]));
    }
  }
}

TEST_CASE("open refinement separates the level closures") {
  CircleMap dbl = CircleMap::doubling();
  Tower t = build_tower(dbl, 3, 1, frac(3, 5), 9);
  Tower o = open_refinement(dbl, t, frac(1, 50));
  CHECK(o.open_variant);
  CHECK(o.min_level_gap > 0);
  CHECK(o.disjoint_ok);
  // measures moved by less than the slack
  CHECK(rat_abs(o.fill - t.fill) < frac(1, 50));
  CHECK(o.fill_ok == (o.fill > 1 - t.eps0 - frac(1, 50)));
}

TEST_SUITE_END();
