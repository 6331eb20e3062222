#include "doctest.h"

#include "acim/errors.hpp"
#include "acim/escape.hpp"
#include "test_util.hpp"

using namespace acim;

TEST_SUITE_BEGIN("escape");

TEST_CASE("identity map certificates are rejected with a witness line") {
  PatchedMap id(CircleMap::rotation(Rat(0)));
  BoxSet K = BoxSet::segment(Rat(0), frac(95, 100));
  CertVerdict v = verify_certificate(id, K, 3, frac(1, 10));
  CHECK(!v.pass);
  CHECK(v.mass_ok);
  CHECK(!v.image_ok);
  CHECK(v.detail.find("REJECT image") == 0);
  CHECK(v.image_measure == K.measure());
}

TEST_CASE("contracting interval surrogate passes") {
  PatchedMap half(CircleMap::halving());
  BoxSet K = BoxSet::unit();
  CertVerdict v = verify_certificate(half, K, 5, frac(1, 10));
  CHECK(v.pass);
  CHECK(v.mass == 1);
  CHECK(v.image_measure == frac(1, 32));
}

TEST_CASE("mass side failures carry the ledger line") {
  PatchedMap half(CircleMap::halving());
  BoxSet K = BoxSet::segment(Rat(0), frac(9, 10));  // m(K) = 9/10, not > 9/10
  CertVerdict v = verify_certificate(half, K, 6, frac(1, 10));
  CHECK(!v.pass);
  CHECK(!v.mass_ok);
  CHECK(v.detail.find("REJECT mass") == 0);
}

TEST_CASE("averaging oracle: invariance and conservation") {
  SUBCASE("identity is exactly uniform") {
    AveragedMeasure a = kb_average(PatchedMap(CircleMap::rotation(Rat(0))), 6, 512, 8);
    CHECK(l1_to_uniform(a) == 0.0);
  }
  SUBCASE("doubling keeps the uniform density on a dyadic grid") {
    AveragedMeasure a = kb_average(PatchedMap(CircleMap::doubling()), 8, 1024, 32);
    CHECK(l1_to_uniform(a) < 1e-2);
    double total = 0;
    for (double v : a.density) total += v;
    CHECK(std::fabs(total - 1.0) < 1e-9);
  }
  SUBCASE("the halving map concentrates mass near the fixed point") {
    AveragedMeasure early = kb_average(PatchedMap(CircleMap::halving()), 5, 1024, 16);
    AveragedMeasure late = kb_average(PatchedMap(CircleMap::halving()), 40, 1024, 16);
    double c_early = concentration_statistic(early, 0.9);
    double c_late = concentration_statistic(late, 0.9);
    CHECK(c_late < c_early);
    CHECK(c_late < 0.2);
  }
}

TEST_CASE("concentration statistic sanity") {
  AveragedMeasure a;
  a.G = 4;
  a.n = 1;
  a.density = {0.7, 0.1, 0.1, 0.1};
  CHECK(concentration_statistic(a, 0.5) == doctest::Approx(0.25));
  CHECK(concentration_statistic(a, 0.85) == doctest::Approx(0.75));
  CHECK_THROWS_AS(concentration_statistic(a, 1.5), input_error);
}

TEST_CASE("grid image oracle tracks the exact measure") {
  PatchedMap dbl(CircleMap::doubling());
  BoxSet K = BoxSet::segment(frac(1, 10), frac(3, 10));
  BoxSet img = dbl.image(K);
  REQUIRE(img.measure() == frac(2, 5));
  double est = grid_image_measure(dbl, K, 1, 4096);
  CHECK(std::fabs(est - 0.4) < 3.0 * (img.component_count() + 1) / 4096);
}

TEST_CASE("search finds escape for the contracting surrogate") {
  PatchedMap half(CircleMap::halving());
  SearchResult r = search_certificate(half, frac(1, 10), 8, 64);
  REQUIRE(r.found);
  CHECK(r.cert.mass > frac(9, 10));
  CHECK(r.cert.image_measure < frac(1, 10));
  CertVerdict v = verify_certificate(half, r.cert.K, r.cert.N, frac(1, 10));
  CHECK(v.pass);
}

TEST_SUITE_END();
