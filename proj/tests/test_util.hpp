// Shared helpers for the test suites: a deterministic generator for random
// rational interval sets and the poly surrogate map used across suites.

#pragma once

#include <cstdint>
#include <vector>

#include "acim/geometry.hpp"
#include "acim/maps.hpp"
#include "acim/rational.hpp"

namespace acim::testutil {

struct Rng {
  std::uint64_t s;
  explicit Rng(std::uint64_t seed) : s(seed ? seed : 0x9e3779b9u) {}
  std::uint64_t next() {
    s ^= s << 13;
    s ^= s >> 7;
    s ^= s << 17;
    return s;
  }
  long uniform(long n) { return (long)(next() % (std::uint64_t)n); }
};

// random canonical 1-d set inside [0,1] with dyadic endpoints
inline BoxSet random_boxset(Rng& rng, int max_components = 6, int denom_pow = 10) {
  long den = 1L << denom_pow;
  int n = 1 + (int)rng.uniform(max_components);
  std::vector<Box> boxes;
  for (int i = 0; i < n; ++i) {
    long a = rng.uniform(den);
    long b = rng.uniform(den) + 1;
    if (a > b) std::swap(a, b);
    if (a == b) ++b;
    boxes.push_back(Box{Interval{frac(a, den), frac(std::min(b, den), den)}});
  }
  return BoxSet::from_boxes(1, boxes);
}

inline BoxSet random_boxset_2d(Rng& rng, int max_components = 4, int denom_pow = 6) {
  long den = 1L << denom_pow;
  int n = 1 + (int)rng.uniform(max_components);
  std::vector<Box> boxes;
  for (int i = 0; i < n; ++i) {
    Box b;
    for (int axis = 0; axis < 2; ++axis) {
      long a = rng.uniform(den);
      long c = rng.uniform(den) + 1;
      if (a > c) std::swap(a, c);
      if (a == c) ++c;
      b.push_back(Interval{frac(a, den), frac(std::min(c, den), den)});
    }
    boxes.push_back(b);
  }
  return BoxSet::from_boxes(2, boxes);
}

// expanding C1 surrogate: 2x + s(x)/20 mod 1 with a smoothstep hump s;
// piecewise cubic, C1 as a circle map, derivative in [37/20, 43/20]
inline CircleMap poly_surrogate() {
  Branch b1{Rat(0), frac(1, 2), {Rat(0), Rat(2), frac(3, 5), frac(-4, 5)}};
  Branch b2{frac(1, 2), Rat(1),
            {frac(-1, 5), frac(16, 5), frac(-9, 5), frac(4, 5)}};
  return CircleMap({b1, b2}, true);
}

}  // namespace acim::testutil
