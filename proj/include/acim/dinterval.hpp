// Outward-rounded double intervals: cheap certified enclosures for the long
// compressor chains where exact rationals would blow up (each bump
// evaluation cubes denominators). Margins in the slicing verdicts are on the
// order of 1e-2..1e-6, far above the ~1e-13 enclosure widths these
// accumulate, so "interval strictly inside" is a sound pass.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "acim/rational.hpp"

namespace acim {

struct DI {
  double lo, hi;

  DI() : lo(0), hi(0) {}
  explicit DI(double x) : lo(x), hi(x) {}
  DI(double l, double h) : lo(l), hi(h) {}

  static DI of_rat(const Rat& x) {
    double d = rat_double(x);
    return DI(std::nextafter(d, -INFINITY), std::nextafter(d, INFINITY));
  }

  bool contains_zero() const { return lo <= 0 && 0 <= hi; }
  double width() const { return hi - lo; }
};

inline DI widen(DI a) {
  return DI(std::nextafter(a.lo, -INFINITY), std::nextafter(a.hi, INFINITY));
}

inline DI operator+(DI a, DI b) { return widen(DI(a.lo + b.lo, a.hi + b.hi)); }
inline DI operator-(DI a, DI b) { return widen(DI(a.lo - b.hi, a.hi - b.lo)); }
inline DI operator-(DI a) { return DI(-a.hi, -a.lo); }

inline DI operator*(DI a, DI b) {
  double p1 = a.lo * b.lo, p2 = a.lo * b.hi, p3 = a.hi * b.lo, p4 = a.hi * b.hi;
  return widen(DI(std::min(std::min(p1, p2), std::min(p3, p4)),
                  std::max(std::max(p1, p2), std::max(p3, p4))));
}

inline DI operator/(DI a, DI b) {
  // caller guarantees 0 not in b
  double p1 = a.lo / b.lo, p2 = a.lo / b.hi, p3 = a.hi / b.lo, p4 = a.hi / b.hi;
  return widen(DI(std::min(std::min(p1, p2), std::min(p3, p4)),
                  std::max(std::max(p1, p2), std::max(p3, p4))));
}

inline DI di_abs(DI a) {
  if (a.lo >= 0) return a;
  if (a.hi <= 0) return DI(-a.hi, -a.lo);
  return DI(0, std::max(-a.lo, a.hi));
}

inline DI di_max(DI a, DI b) { return DI(std::max(a.lo, b.lo), std::max(a.hi, b.hi)); }

}  // namespace acim
