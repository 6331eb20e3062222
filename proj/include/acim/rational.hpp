// Exact rational scalar type and parsing/formatting helpers.
//
// All measure ledgers and set endpoints in the toolkit are exact rationals;
// there is no floating point anywhere in the certificate chain.

#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <optional>
#include <string>

namespace acim {

using Rat = mpq_class;

// Parses "p/q", plain integers ("3", "-2") and decimal literals ("0.05",
// "-1.25") into an exact rational. Throws std::invalid_argument on junk.
Rat parse_rat(const std::string& s);

// Canonical "p/q" (or "p" when q == 1).
std::string rat_str(const Rat& x);

// Fixed-point decimal rendering (round-to-nearest), for report readability.
std::string rat_decimal(const Rat& x, int digits = 9);

double rat_double(const Rat& x);

inline Rat rat_abs(const Rat& x) { return x < 0 ? Rat(-x) : x; }

// x^e for integer e (e may be negative; x must be nonzero then).
Rat rat_pow(const Rat& x, long e);

// Largest integer n with n <= x.
long rat_floor_long(const Rat& x);

inline Rat rat_min(const Rat& a, const Rat& b) { return a < b ? a : b; }
inline Rat rat_max(const Rat& a, const Rat& b) { return a < b ? b : a; }

// mpq_class(p, q) does not canonicalize; this does.
inline Rat frac(long p, long q) {
  Rat r(p, q);
  r.canonicalize();
  return r;
}

}  // namespace acim
