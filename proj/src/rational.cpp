#include "acim/rational.hpp"

#include <cctype>
#include <sstream>
#include <stdexcept>

namespace acim {

Rat parse_rat(const std::string& s) {
  if (s.empty()) throw std::invalid_argument("empty rational literal");
  std::string t;
  t.reserve(s.size());
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) t.push_back(c);
  if (t.empty()) throw std::invalid_argument("empty rational literal");

  auto dot = t.find('.');
  if (dot != std::string::npos) {
    if (t.find('/') != std::string::npos)
      throw std::invalid_argument("mixed decimal/fraction literal: " + s);
    std::string digits = t.substr(0, dot) + t.substr(dot + 1);
    size_t frac_len = t.size() - dot - 1;
    if (digits.empty() || digits == "-" || digits == "+")
      throw std::invalid_argument("bad decimal literal: " + s);
    mpz_class num;
    if (mpz_set_str(num.get_mpz_t(), digits.c_str(), 10) != 0)
      throw std::invalid_argument("bad decimal literal: " + s);
    mpz_class den;
    mpz_ui_pow_ui(den.get_mpz_t(), 10, frac_len);
    Rat r(num, den);
    r.canonicalize();
    return r;
  }

  Rat r;
  if (mpq_set_str(r.get_mpq_t(), t.c_str(), 10) != 0)
    throw std::invalid_argument("bad rational literal: " + s);
  if (r.get_den() == 0) throw std::invalid_argument("zero denominator: " + s);
  r.canonicalize();
  return r;
}

std::string rat_str(const Rat& x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

std::string rat_decimal(const Rat& x, int digits) {
  mpz_class scale;
  mpz_ui_pow_ui(scale.get_mpz_t(), 10, digits);
  // round half away from zero
  mpz_class num2 = x.get_num() * scale * 2 + (x >= 0 ? x.get_den() : -x.get_den());
  mpz_class q = num2 / (x.get_den() * 2);
  bool neg = q < 0;
  mpz_class aq = neg ? mpz_class(-q) : q;
  std::string ds = aq.get_str();
  if ((int)ds.size() <= digits) ds = std::string(digits + 1 - ds.size(), '0') + ds;
  std::string out = ds.substr(0, ds.size() - digits) + "." + ds.substr(ds.size() - digits);
  return neg ? "-" + out : out;
}

double rat_double(const Rat& x) { return x.get_d(); }

Rat rat_pow(const Rat& x, long e) {
  if (e == 0) return Rat(1);
  Rat base = x;
  if (e < 0) {
    if (x == 0) throw std::domain_error("rat_pow: 0 to negative power");
    base = Rat(1) / x;
    e = -e;
  }
  Rat acc(1);
  while (e > 0) {
    if (e & 1) acc *= base;
    base *= base;
    e >>= 1;
  }
  return acc;
}

long rat_floor_long(const Rat& x) {
  mpz_class q;
  mpz_fdiv_q(q.get_mpz_t(), x.get_num().get_mpz_t(), x.get_den().get_mpz_t());
  if (!q.fits_slong_p()) throw std::overflow_error("rat_floor_long overflow");
  return q.get_si();
}

}  // namespace acim
