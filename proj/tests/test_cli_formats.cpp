#include "doctest.h"

#include "acim/errors.hpp"
#include "acim/maps.hpp"
#include "acim/rational.hpp"
#include "acim/slicing.hpp"

#include "json.hpp"

using namespace acim;

TEST_SUITE_BEGIN("formats");

TEST_CASE("rational literals") {
  CHECK(parse_rat("3/4") == frac(3, 4));
  CHECK(parse_rat("-7/2") == frac(-7, 2));
  CHECK(parse_rat("5") == Rat(5));
  CHECK(parse_rat("0.05") == frac(1, 20));
  CHECK(parse_rat("-1.25") == frac(-5, 4));
  CHECK(parse_rat(" 2/6 ") == frac(1, 3));
  CHECK_THROWS_AS(parse_rat("abc"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rat("1/0"), std::invalid_argument);
  CHECK(rat_str(frac(2, 6)) == "1/3");
  CHECK(rat_decimal(frac(1, 8), 4) == "0.1250");
  CHECK(rat_decimal(frac(-1, 3), 3) == "-0.333");
}

TEST_CASE("rational helpers") {
  CHECK(rat_pow(frac(3, 2), 3) == frac(27, 8));
  CHECK(rat_pow(frac(1, 2), -2) == Rat(4));
  CHECK(rat_pow(frac(5, 7), 0) == 1);
  CHECK(rat_floor_long(frac(7, 2)) == 3);
  CHECK(rat_floor_long(frac(-7, 2)) == -4);
}

TEST_CASE("map spec files parse into working maps") {
  nlohmann::json j = nlohmann::json::parse(R"({
    "type": "piecewise_affine_circle",
    "mod1": true,
    "branches": [
      {"dom": ["0", "1/2"], "slope": "2", "offset": "0"},
      {"dom": ["1/2", "1"], "slope": "2", "offset": "-1"}
    ]
  })");
  CircleMap f = CircleMap::from_json(j);
  CHECK(f.exact_mode());
  CHECK(f.evaluate(frac(3, 4)) == frac(1, 2));
  CHECK(f.nonsingularity_constant() == 1);

  nlohmann::json bad = j;
  bad["branches"][1]["dom"][0] = "2/3";
  CHECK_THROWS_AS(CircleMap::from_json(bad), input_error);
  bad = j;
  bad["type"] = "unknown";
  CHECK_THROWS_AS(CircleMap::from_json(bad), input_error);
}

TEST_CASE("matrix sequence specs") {
  nlohmann::json j = nlohmann::json::parse(
      R"([["2", "1/3"], ["0", "1/2"]])");
  MatQ m = matq_from_json(j);
  CHECK(m.at(0, 1) == frac(1, 3));
  CHECK(matq_from_json(matq_to_json(m)) == m);
  CHECK(m.det() == Rat(1));
  MatQ inv = m.inverse();
  CHECK((m * inv) == MatQ::identity(2));
}

TEST_SUITE_END();
