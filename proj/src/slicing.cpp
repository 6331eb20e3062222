#include "acim/slicing.hpp"

#include <algorithm>
#include <cmath>

#include "acim/errors.hpp"

namespace acim {

// ------------------------------------------------------------------ MatQ

MatQ MatQ::identity(int d) {
  MatQ m(d);
  for (int i = 0; i < d; ++i) m.at(i, i) = 1;
  return m;
}

MatQ MatQ::operator*(const MatQ& o) const {
  if (d_ != o.d_) throw input_error("matrix dimension mismatch");
  MatQ r(d_);
  for (int i = 0; i < d_; ++i)
    for (int k = 0; k < d_; ++k) {
      const Rat& a = at(i, k);
      if (a == 0) continue;
      for (int j = 0; j < d_; ++j) r.at(i, j) += a * o.at(k, j);
    }
  return r;
}

std::vector<Rat> MatQ::apply(const std::vector<Rat>& v) const {
  if ((int)v.size() != d_) throw input_error("matrix/vector dimension mismatch");
  std::vector<Rat> r(d_, Rat(0));
  for (int i = 0; i < d_; ++i)
    for (int j = 0; j < d_; ++j) r[i] += at(i, j) * v[j];
  return r;
}

Rat MatQ::det() const {
  MatQ a = *this;
  Rat det(1);
  for (int col = 0; col < d_; ++col) {
    int piv = -1;
    for (int r = col; r < d_; ++r)
      if (a.at(r, col) != 0) {
        piv = r;
        break;
      }
    if (piv < 0) return Rat(0);
    if (piv != col) {
      for (int j = 0; j < d_; ++j) std::swap(a.at(piv, j), a.at(col, j));
      det = -det;
    }
    det *= a.at(col, col);
    for (int r = col + 1; r < d_; ++r) {
      if (a.at(r, col) == 0) continue;
      Rat f = a.at(r, col) / a.at(col, col);
      for (int j = col; j < d_; ++j) a.at(r, j) -= f * a.at(col, j);
    }
  }
  return det;
}

MatQ MatQ::inverse() const {
  MatQ a = *this;
  MatQ inv = MatQ::identity(d_);
  for (int col = 0; col < d_; ++col) {
    int piv = -1;
    for (int r = col; r < d_; ++r)
      if (a.at(r, col) != 0) {
        piv = r;
        break;
      }
    if (piv < 0) throw input_error("singular matrix");
    if (piv != col)
      for (int j = 0; j < d_; ++j) {
        std::swap(a.at(piv, j), a.at(col, j));
        std::swap(inv.at(piv, j), inv.at(col, j));
      }
    Rat p = a.at(col, col);
    for (int j = 0; j < d_; ++j) {
      a.at(col, j) /= p;
      inv.at(col, j) /= p;
    }
    for (int r = 0; r < d_; ++r) {
      if (r == col || a.at(r, col) == 0) continue;
      Rat f = a.at(r, col);
      for (int j = 0; j < d_; ++j) {
        a.at(r, j) -= f * a.at(col, j);
        inv.at(r, j) -= f * inv.at(col, j);
      }
    }
  }
  return inv;
}

nlohmann::json matq_to_json(const MatQ& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.dim(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.dim(); ++j) row.push_back(rat_str(m.at(i, j)));
    rows.push_back(row);
  }
  return rows;
}

MatQ matq_from_json(const nlohmann::json& j) {
  int d = (int)j.size();
  MatQ m(d);
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k)
      m.at(i, k) = parse_rat(j.at(i).at(k).get<std::string>());
  return m;
}

// --------------------------------------------------------- NormalizedSeq

Rat NormalizedSeq::gauge(int i, const std::vector<Rat>& z) const {
  Rat best(0);
  const MatQ& Mi = MInv[i];
  for (int r = 0; r < d - 1; ++r) {
    Rat v(0);
    for (int c = 0; c < d - 1; ++c) v += Mi.at(r, c) * z[c];
    best = rat_max(best, rat_abs(v));
  }
  return best;
}

DI NormalizedSeq::gauge_di(int i, const std::vector<DI>& z) const {
  DI best(0.0);
  const MatQ& Mi = MInv[i];
  for (int r = 0; r < d - 1; ++r) {
    DI v(0.0);
    for (int c = 0; c < d - 1; ++c) v = v + DI::of_rat(Mi.at(r, c)) * z[c];
    best = di_max(best, di_abs(v));
  }
  return best;
}

bool NormalizedSeq::prefix_equal(const NormalizedSeq& o, int upto) const {
  if (d != o.d) return false;
  for (int i = 0; i <= upto; ++i) {
    if (!(R[i] == o.R[i])) return false;
    if (!(M[i] == o.M[i])) return false;
    if (alpha[i] != o.alpha[i]) return false;
    if (i >= 1 && !(Lt[i] == o.Lt[i])) return false;
  }
  return true;
}

namespace {

// scale a rational vector to a primitive integer direction (fixed sign)
std::vector<Rat> primitive_direction(const std::vector<Rat>& v) {
  mpz_class den_lcm(1), num_gcd(0);
  for (const auto& x : v) {
    mpz_class l;
    mpz_lcm(l.get_mpz_t(), den_lcm.get_mpz_t(), x.get_den().get_mpz_t());
    den_lcm = l;
  }
  std::vector<mpz_class> ints;
  for (const auto& x : v) ints.push_back(x.get_num() * (den_lcm / x.get_den()));
  for (const auto& z : ints) {
    mpz_class g;
    mpz_gcd(g.get_mpz_t(), num_gcd.get_mpz_t(), z.get_mpz_t());
    num_gcd = g;
  }
  if (num_gcd == 0) throw input_error("zero direction vector");
  std::vector<Rat> out;
  bool flip = false;
  for (const auto& z : ints)
    if (z != 0) {
      flip = z < 0;
      break;
    }
  for (const auto& z : ints) {
    mpz_class q = z / num_gcd;
    out.push_back(Rat(flip ? mpz_class(-q) : q));
  }
  return out;
}

bool preserves_hyperplane(const MatQ& m) {
  int d = m.dim();
  for (int j = 0; j + 1 < d; ++j)
    if (m.at(d - 1, j) != 0) return false;
  return true;
}

}  // namespace

NormalizedSeq normalize_sequence(const std::vector<MatQ>& L) {
  if (L.empty()) throw input_error("empty matrix sequence");
  NormalizedSeq s;
  s.d = L[0].dim();
  s.n = (int)L.size();
  s.L.assign(s.n + 1, MatQ(s.d));
  for (int i = 1; i <= s.n; ++i) {
    if (L[i - 1].dim() != s.d) throw input_error("mixed matrix dimensions");
    if (L[i - 1].det() == 0) throw input_error("singular matrix in sequence");
    s.L[i] = L[i - 1];
  }

  s.R.assign(s.n + 1, MatQ::identity(s.d));
  s.Lt.assign(s.n + 1, MatQ(s.d));
  s.LtInv.assign(s.n + 1, MatQ(s.d));
  s.alpha.assign(s.n + 1, Rat(1));
  s.beta.assign(s.n + 1, Rat(1));

  if (s.d == 1) {
    for (int i = 1; i <= s.n; ++i) {
      s.Lt[i] = s.L[i];
      s.LtInv[i] = s.L[i].inverse();
      s.beta[i] = rat_abs(s.LtInv[i].at(0, 0));
      s.alpha[i] = s.alpha[i - 1] * s.beta[i];
    }
    s.M.assign(s.n + 1, MatQ(0));
    s.MInv.assign(s.n + 1, MatQ(0));
    s.gauge_cmp.assign(s.n + 1, Rat(0));
    return s;
  }

  bool all_triangular = true;
  for (int i = 1; i <= s.n; ++i)
    if (!preserves_hyperplane(s.L[i].inverse())) all_triangular = false;

  if (!all_triangular) {
    if (s.d != 2)
      throw input_error(
          "normalize_sequence: general-position sequences supported in d <= 2 "
          "(d >= 3 needs block-triangular input)");
    // hyperplane chain P_i = L_i^{-1}(P_{i-1}) as primitive directions;
    // conformal R_i = [[u1,u2],[-u2,u1]] sends u_i to the horizontal axis
    std::vector<Rat> u{Rat(1), Rat(0)};
    for (int i = 0; i <= s.n; ++i) {
      if (i > 0) u = primitive_direction(s.L[i].inverse().apply(u));
      MatQ Ri(2);
      Ri.at(0, 0) = u[0];
      Ri.at(0, 1) = u[1];
      Ri.at(1, 0) = -u[1];
      Ri.at(1, 1) = u[0];
      s.R[i] = Ri;
    }
  }

  for (int i = 1; i <= s.n; ++i) {
    s.Lt[i] = s.R[i - 1] * s.L[i] * s.R[i].inverse();
    if (!preserves_hyperplane(s.Lt[i]) || !preserves_hyperplane(s.Lt[i].inverse()))
      throw std::logic_error("normalization failed to fix the hyperplane");
    s.LtInv[i] = s.Lt[i].inverse();
    s.beta[i] = rat_abs(s.LtInv[i].at(s.d - 1, s.d - 1));
    s.alpha[i] = s.alpha[i - 1] * s.beta[i];
  }

  // ball chain: C_i = A_i C_{i-1} with A_i the hyperplane block of LtInv_i
  s.M.assign(s.n + 1, MatQ::identity(s.d - 1));
  s.MInv.assign(s.n + 1, MatQ::identity(s.d - 1));
  s.gauge_cmp.assign(s.n + 1, Rat(1));
  for (int i = 1; i <= s.n; ++i) {
    MatQ Ai(s.d - 1);
    for (int r = 0; r + 1 < s.d; ++r)
      for (int c = 0; c + 1 < s.d; ++c) Ai.at(r, c) = s.LtInv[i].at(r, c);
    s.M[i] = Ai * s.M[i - 1];
    s.MInv[i] = s.M[i].inverse();
  }
  for (int i = 0; i <= s.n; ++i) {
    // sound comparison constant: ||v||_* = ||MInv v||_inf <= C ||v||_2 with
    // C = max_r ||row_r||_2 <= max_r ||row_r||_1 (exact in d=2)
    Rat C(0);
    for (int r = 0; r + 1 < s.d; ++r) {
      Rat row(0);
      for (int c = 0; c + 1 < s.d; ++c) row += rat_abs(s.MInv[i].at(r, c));
      C = rat_max(C, row);
    }
    s.gauge_cmp[i] = C;
  }
  return s;
}

// ------------------------------------------------------ parameter calculus

Rat compute_kappa(const Rat& eps, const Rat& delta) {
  if (!(eps > 0) || !(delta > 0) || !(delta < 1))
    throw input_error("compute_kappa needs eps > 0, delta in (0,1)");
  Rat budget = 1 + 2 / delta;
  Rat crit = 1 - eps / budget;
  if (crit <= 0) return frac(1, 2);
  return (crit + 1) / 2;
}

int compute_k(const Rat& kappa, const Rat& delta) {
  if (!(kappa > 0) || !(kappa < 1)) throw input_error("kappa must be in (0,1)");
  Rat ratio = delta / (1 - delta);
  Rat p = kappa;
  int k = 1;
  while (!(p < ratio)) {
    p *= kappa;
    if (++k > 1000000) throw resource_error("compute_k: no k below 10^6");
  }
  return k;
}

Rat compute_tau0(const NormalizedSeq& seq, const Rat& lambda, const Rat& delta,
                 const Rat& eps) {
  (void)eps;
  if (seq.d == 1) return Rat(1);  // any positive threshold works; default
  if (!(lambda > 1)) throw input_error("lambda must exceed 1");
  Rat lam2n = rat_pow(lambda, 2L * seq.n);
  Rat best(0);
  bool have = false;
  for (int i = 1; i <= seq.n; ++i) {
    // support constraint from the basic perturbation: tau* = 1/C
    Rat cand = Rat(1) / (seq.gauge_cmp[i] * seq.alpha[i]);
    if (!have || cand < best) {
      best = cand;
      have = true;
    }
    // shear constraint: vertical translation at full height must fit in the
    // (lambda - 1) dilation collar of the ball
    std::vector<Rat> bcol(seq.d - 1, Rat(0));
    for (int r = 0; r + 1 < seq.d; ++r) bcol[r] = seq.LtInv[i].at(r, seq.d - 1);
    Rat shear = seq.gauge(i, bcol);
    if (shear > 0) {
      Rat thr = (lambda - 1) / (seq.alpha[i - 1] * shear);
      if (thr < best) best = thr;
    }
  }
  Rat tau0 = best / lam2n;

  // brute-force vertex validation of the sandwich at the extreme ratio; the
  // derivation above is exact, the check guards the implementation
  for (int attempt = 0; attempt < 64; ++attempt) {
    bool ok = true;
    Rat b_over_a = lam2n * tau0 * frac(63, 64);
    for (int i = 1; i <= seq.n && ok; ++i) {
      // vertices of B_{i-1}[1, b] must map into B_i[lambda, b] under LtInv_i,
      // and vertices of B_i[lambda^-1, b] into B_{i-1}[1, b] under Lt_i
      Rat b = b_over_a;
      int corners = 1 << (seq.d - 1);
      for (int mask = 0; mask < corners && ok; ++mask) {
        for (int tside = -1; tside <= 1 && ok; tside += 2) {
          std::vector<Rat> z(seq.d - 1);
          for (int c = 0; c + 1 < seq.d; ++c) {
            Rat e(0);
            for (int r = 0; r + 1 < seq.d; ++r)
              e += seq.M[i - 1].at(c, r) * Rat((mask >> r) & 1 ? 1 : -1);
            z[c] = e;
          }
          std::vector<Rat> x(z);
          x.push_back(Rat(tside) * seq.alpha[i - 1] * b);
          std::vector<Rat> y = seq.LtInv[i].apply(x);
          std::vector<Rat> yz(y.begin(), y.end() - 1);
          if (!(seq.gauge(i, yz) <= lambda) ||
              !(rat_abs(y.back()) <= seq.alpha[i] * b))
            ok = false;

          std::vector<Rat> z2(seq.d - 1);
          for (int c = 0; c + 1 < seq.d; ++c) {
            Rat e(0);
            for (int r = 0; r + 1 < seq.d; ++r)
              e += seq.M[i].at(c, r) * Rat((mask >> r) & 1 ? 1 : -1);
            z2[c] = e / lambda;
          }
          std::vector<Rat> x2(z2);
          x2.push_back(Rat(tside) * seq.alpha[i] * b);
          std::vector<Rat> y2 = seq.Lt[i].apply(x2);
          std::vector<Rat> y2z(y2.begin(), y2.end() - 1);
          if (!(seq.gauge(i - 1, y2z) <= 1) ||
              !(rat_abs(y2.back()) <= seq.alpha[i - 1] * b))
            ok = false;
        }
      }
    }
    if (ok) return tau0;
    tau0 /= 2;
  }
  throw std::logic_error("compute_tau0: vertex validation failed to converge");
}

SlicingPlan make_plan(const NormalizedSeq& seq, const Rat& eps, const Rat& delta) {
  SlicingPlan p;
  p.eps = eps;
  p.delta = delta;
  p.kappa = compute_kappa(eps, delta);
  p.k = compute_k(p.kappa, delta);
  p.bump_delta = delta / 2;
  p.n = seq.n;
  if (seq.n < p.k)
    throw precondition_error("sequence shorter than k");

  // headroom check: the kappa from (eps, delta) still fits the half-shoulder
  // profile's derivative budget
  if (!((1 - p.kappa) * (1 + 2 / p.bump_delta) < eps) && (1 + 2 / delta) > eps)
    throw std::logic_error("kappa headroom violated");

  if (seq.d == 1) {
    p.lambda = Rat(2);
    p.lambda_n = Rat(1);  // unused in d = 1 (no transverse ball)
    p.tau0 = compute_tau0(seq, p.lambda, delta, eps);
  } else {
    Rat target = (1 - delta / 2) / (1 - delta);  // > 1
    long m = 2;
    while (true) {
      Rat lam = 1 + Rat(1) / Rat(m);
      if (rat_pow(lam, 3L * seq.n) < target) {
        p.lambda = lam;
        break;
      }
      m *= 2;
      if (m > (1L << 40)) throw resource_error("lambda search failed");
    }
    p.lambda_n = rat_pow(p.lambda, seq.n);
    p.tau0 = compute_tau0(seq, p.lambda, delta, eps);
  }
  p.tau = p.tau0 / 2;
  return p;
}

nlohmann::json SlicingPlan::to_json() const {
  return {{"eps", rat_str(eps)},        {"delta", rat_str(delta)},
          {"kappa", rat_str(kappa)},    {"k", k},
          {"bump_delta", rat_str(bump_delta)},
          {"lambda", rat_str(lambda)},  {"tau0", rat_str(tau0)},
          {"tau", rat_str(tau)},        {"n", n}};
}

// ------------------------------------------------------------- Compressor

Compressor build_compressor(int i, const NormalizedSeq& seq, const SlicingPlan& plan) {
  if (i < 1 || i > seq.n) throw input_error("compressor index out of range");
  Compressor c;
  c.i = i;
  c.d = seq.d;
  c.kappa = plan.kappa;
  c.bump_delta = plan.bump_delta;
  c.lambda_n = plan.lambda_n;
  c.tau = plan.tau;
  c.alpha_i = seq.alpha[i];
  if (seq.d > 1) c.MInv_i = seq.MInv[i];
  return c;
}

bool Compressor::operator==(const Compressor& o) const {
  return i == o.i && d == o.d && kappa == o.kappa && bump_delta == o.bump_delta &&
         lambda_n == o.lambda_n && tau == o.tau && alpha_i == o.alpha_i &&
         MInv_i == o.MInv_i;
}

namespace {

Rat gauge_of(const MatQ& MInv, const std::vector<Rat>& z) {
  Rat best(0);
  int dz = MInv.dim();
  for (int r = 0; r < dz; ++r) {
    Rat v(0);
    for (int c = 0; c < dz; ++c) v += MInv.at(r, c) * z[c];
    best = rat_max(best, rat_abs(v));
  }
  return best;
}

}  // namespace

bool Compressor::inside_support(const std::vector<Rat>& x) const {
  Rat t = x.back();
  if (!(rat_abs(t) < alpha_i * tau)) return false;
  if (d == 1) return true;
  std::vector<Rat> z(x.begin(), x.end() - 1);
  return gauge_of(MInv_i, z) * lambda_n < 1;
}

std::vector<Rat> Compressor::evaluate(const std::vector<Rat>& x) const {
  if ((int)x.size() != d) throw input_error("point dimension mismatch");
  Bump bump(bump_delta);
  Rat t = x.back();
  Rat rho_t = bump.value(t / (alpha_i * tau));
  Rat rho_z(1);
  if (d > 1) {
    std::vector<Rat> z(x.begin(), x.end() - 1);
    rho_z = bump.value(lambda_n * gauge_of(MInv_i, z));
  }
  std::vector<Rat> y = x;
  y.back() = t * (1 - (1 - kappa) * rho_t * rho_z);
  return y;
}

std::vector<DI> Compressor::evaluate_di(const std::vector<DI>& x) const {
  Bump bump(bump_delta);
  double dd = rat_double(bump_delta);
  auto bump_di = [&](DI u) -> DI {
    DI a = di_abs(u);
    if (a.hi <= 1.0 - dd) return DI(1.0);
    if (a.lo >= 1.0) return DI(0.0);
    // v = (|u| - (1 - dd)) / dd clamped to [0,1]; sigma = v^2 (3 - 2v)
    DI v = (a - DI(1.0 - dd)) / DI::of_rat(bump_delta);
    v.lo = std::max(v.lo, 0.0);
    v.hi = std::min(v.hi, 1.0);
    DI sig = v * v * (DI(3.0) - DI(2.0) * v);
    DI r = DI(1.0) - sig;
    r.lo = std::max(r.lo, 0.0);
    r.hi = std::min(r.hi, 1.0);
    return r;
  };

  DI t = x.back();
  DI rho_t = bump_di(t / DI::of_rat(alpha_i * tau));
  DI rho_z(1.0);
  if (d > 1) {
    std::vector<DI> z(x.begin(), x.end() - 1);
    DI g(0.0);
    for (int r = 0; r + 1 < d; ++r) {
      DI v(0.0);
      for (int c = 0; c + 1 < d; ++c) v = v + DI::of_rat(MInv_i.at(r, c)) * z[c];
      g = di_max(g, di_abs(v));
    }
    rho_z = bump_di(DI::of_rat(lambda_n) * g);
  }
  std::vector<DI> y = x;
  y.back() = t * (DI(1.0) - DI::of_rat(1 - kappa) * rho_t * rho_z);
  return y;
}

MatQ Compressor::jacobian(const std::vector<Rat>& x) const {
  Bump bump(bump_delta);
  MatQ J = MatQ::identity(d);
  Rat t = x.back();
  Rat ut = t / (alpha_i * tau);
  Rat rho_t = bump.value(ut);
  Rat drho_t = bump.derivative(ut) / (alpha_i * tau);

  Rat rho_z(1), uz(0);
  std::vector<Rat> grad_gauge(d - 1, Rat(0));
  if (d > 1) {
    std::vector<Rat> z(x.begin(), x.end() - 1);
    // gauge = max_r |row_r . z|; gradient from the first maximizing row
    Rat best(-1);
    int best_r = 0;
    Rat best_v(0);
    for (int r = 0; r + 1 < d; ++r) {
      Rat v(0);
      for (int c = 0; c + 1 < d; ++c) v += MInv_i.at(r, c) * z[c];
      if (rat_abs(v) > best) {
        best = rat_abs(v);
        best_r = r;
        best_v = v;
      }
    }
    uz = lambda_n * best;
    rho_z = bump.value(uz);
    Rat s = best_v >= 0 ? Rat(1) : Rat(-1);
    for (int c = 0; c + 1 < d; ++c) grad_gauge[c] = s * MInv_i.at(best_r, c);
  }

  // d/dt: factor + t * (1-kappa) * (-drho_t) * rho_z
  J.at(d - 1, d - 1) =
      1 - (1 - kappa) * (rho_t * rho_z + t * drho_t * rho_z);
  // d/dz_j: t * (1-kappa) * (-rho_t) * rho'(uz) * lambda_n * grad_j
  if (d > 1) {
    Rat drho_uz = bump.derivative(uz);
    for (int j = 0; j + 1 < d; ++j)
      J.at(d - 1, j) = -(1 - kappa) * t * rho_t * drho_uz * lambda_n * grad_gauge[j];
  }
  return J;
}

// ------------------------------------------------------------ verification

namespace {

// deterministic low-discrepancy rational in [0,1] with denominator 2^16
Rat lds_rat(std::uint64_t k, int dim, std::uint64_t seed) {
  static const std::uint64_t mults[] = {40503u,  27961u, 48271u,
                                        44485u,  12923u, 21401u};
  std::uint64_t v = (k * mults[dim % 6] + seed * 7919u + (std::uint64_t)dim * 104729u);
  v %= 65536u;
  Rat r(2 * (long)v + 1, 2 * 65536L);
  r.canonicalize();
  return r;
}

}  // namespace

JacobianVerdict check_jacobian_near_id(const Compressor& c, const Rat& eps,
                                       int samples, std::uint64_t seed) {
  JacobianVerdict verdict;
  Rat eps_sq = eps * eps;
  double max_dev = 0, max_fd = 0;
  for (int s = 0; s < samples; ++s) {
    // sample inside the support box (and a band just outside)
    std::vector<Rat> x;
    if (c.d > 1) {
      std::vector<Rat> w(c.d - 1);
      for (int j = 0; j + 1 < c.d; ++j) w[j] = 2 * lds_rat(s, j, seed) - 1;
      // z = lambda^-n M w spans the support slab in z
      std::vector<Rat> z(c.d - 1, Rat(0));
      MatQ Mi = c.MInv_i.inverse();
      for (int r = 0; r + 1 < c.d; ++r) {
        for (int cc = 0; cc + 1 < c.d; ++cc) z[r] += Mi.at(r, cc) * w[cc];
        z[r] /= c.lambda_n;
      }
      x = z;
    }
    x.push_back((2 * lds_rat(s, c.d - 1, seed) - 1) * c.alpha_i * c.tau);

    MatQ J = c.jacobian(x);
    Rat dev_sq(0);
    for (int j = 0; j < c.d; ++j) {
      Rat r = J.at(c.d - 1, j) - (j == c.d - 1 ? Rat(1) : Rat(0));
      dev_sq += r * r;
    }
    double dv = std::sqrt(rat_double(dev_sq));
    max_dev = std::max(max_dev, dv);
    if (!(dev_sq < eps_sq)) {
      verdict.pass = false;
      verdict.samples_checked = s + 1;
      verdict.max_deviation = dv;
      verdict.witness = x;
      return verdict;
    }

    // finite-difference cross-check on a thin subsample
    if (s % 97 == 0) {
      std::vector<DI> xd;
      for (const auto& q : x) xd.push_back(DI::of_rat(q));
      double h = 1e-6;
      for (int j = 0; j < c.d; ++j) {
        std::vector<DI> xp = xd, xm = xd;
        xp[j] = xp[j] + DI(h);
        xm[j] = xm[j] - DI(h);
        double fd = (c.evaluate_di(xp).back().lo - c.evaluate_di(xm).back().lo) / (2 * h);
        double ex = rat_double(J.at(c.d - 1, j));
        max_fd = std::max(max_fd, std::fabs(fd - ex));
      }
    }
  }
  verdict.pass = true;
  verdict.samples_checked = samples;
  verdict.max_deviation = max_dev;
  verdict.max_fd_mismatch = max_fd;
  return verdict;
}

ShrinkVerdict verify_shrink(const NormalizedSeq& seq, const SlicingPlan& plan,
                            int i, int samples, std::uint64_t seed,
                            const Rat* tau_override) {
  if (i < plan.k || i > seq.n)
    throw input_error("verify_shrink needs k <= i <= n");
  Rat tau = tau_override ? *tau_override : plan.tau;
  if (!(tau > 0 && tau < plan.tau0))
    throw precondition_error("tau outside (0, tau0)");

  SlicingPlan local = plan;
  local.tau = tau;
  std::vector<Compressor> H;
  for (int j = i - plan.k + 1; j <= i; ++j)
    H.push_back(build_compressor(j, seq, local));

  // exact chain matrices
  MatQ chainInv_i = MatQ::identity(seq.d);
  for (int j = 1; j <= i; ++j) chainInv_i = seq.LtInv[j] * chainInv_i;
  MatQ chainInv_low = MatQ::identity(seq.d);
  for (int j = 1; j <= i - plan.k; ++j) chainInv_low = seq.LtInv[j] * chainInv_low;
  MatQ chainFwd_low = chainInv_low.inverse();

  const Rat one_minus_delta = 1 - plan.delta;
  Rat t_half = one_minus_delta * tau;  // before alpha scaling (V_0 has alpha_0 = 1)

  ShrinkVerdict verdict;
  verdict.i = i;
  double worst = 1e300;

  auto run_point = [&](const std::vector<Rat>& p) -> bool {
    // p = (z, t) in V_0 parameters; start point chainInv_i * p
    std::vector<Rat> x0 = chainInv_i.apply(p);
    std::vector<DI> x;
    for (const auto& q : x0) x.push_back(DI::of_rat(q));
    for (int j = (int)H.size() - 1; j >= 0; --j) {
      x = H[j].evaluate_di(x);
      // apply Lt of the same level
      const MatQ& Ltj = seq.Lt[H[j].i];
      std::vector<DI> y(seq.d, DI(0.0));
      for (int r = 0; r < seq.d; ++r)
        for (int cc = 0; cc < seq.d; ++cc)
          y[r] = y[r] + DI::of_rat(Ltj.at(r, cc)) * x[cc];
      x = y;
    }
    // membership: W_{i-k} = chainInv_low(W_0), so x lands inside iff
    // chainFwd_low x lies in W_0 = [-1,1]^{d-1} x [-delta tau, delta tau]
    std::vector<DI> w(seq.d, DI(0.0));
    for (int r = 0; r < seq.d; ++r)
      for (int cc = 0; cc < seq.d; ++cc)
        w[r] = w[r] + DI::of_rat(chainFwd_low.at(r, cc)) * x[cc];
    DI margin(1e300);
    if (seq.d > 1) {
      for (int r = 0; r + 1 < seq.d; ++r) {
        DI m = DI(1.0) - di_abs(w[r]);
        if (m.lo < margin.lo) margin = m;
      }
    }
    {
      DI denom = DI::of_rat(plan.delta * tau);
      DI m = (denom - di_abs(w.back())) / denom;
      if (m.lo < margin.lo) margin = m;
    }
    if (margin.lo < worst) worst = margin.lo;
    if (!(margin.lo > 0)) {
      verdict.counterexample.clear();
      for (const auto& q : p) verdict.counterexample.push_back(rat_double(q));
      return false;
    }
    return true;
  };

  int checked = 0;
  // vertices and facet centers of V_i (exact images of V_0's)
  {
    std::vector<std::vector<Rat>> pts;
    int corners = 1 << (seq.d - 1);
    for (int mask = 0; mask < corners; ++mask)
      for (int tside = -1; tside <= 1; tside += 2) {
        std::vector<Rat> zw(seq.d - 1);
        for (int r = 0; r + 1 < seq.d; ++r) {
          Rat e(0);
          for (int cc = 0; cc + 1 < seq.d; ++cc)
            e += seq.M[0].at(r, cc) * Rat((mask >> cc) & 1 ? 1 : -1);
          zw[r] = e * one_minus_delta;
        }
        std::vector<Rat> p = zw;
        p.push_back(Rat(tside) * t_half);
        pts.push_back(p);
      }
    for (int axis = 0; axis < seq.d; ++axis)
      for (int side = -1; side <= 1; side += 2) {
        std::vector<Rat> p(seq.d, Rat(0));
        p[axis] = Rat(side) * (axis + 1 == seq.d ? t_half : one_minus_delta);
        pts.push_back(p);
      }
    for (const auto& p : pts) {
      ++checked;
      if (!run_point(p)) {
        verdict.pass = false;
        verdict.samples_checked = checked;
        verdict.worst_margin = worst;
        return verdict;
      }
    }
  }
  for (int s = 0; s < samples; ++s) {
    std::vector<Rat> p(seq.d);
    for (int j = 0; j + 1 < seq.d; ++j)
      p[j] = (2 * lds_rat(s, j, seed) - 1) * one_minus_delta;
    p[seq.d - 1] = (2 * lds_rat(s, seq.d - 1, seed) - 1) * t_half;
    ++checked;
    if (!run_point(p)) {
      verdict.pass = false;
      verdict.samples_checked = checked;
      verdict.worst_margin = worst;
      return verdict;
    }
  }
  verdict.pass = true;
  verdict.samples_checked = checked;
  verdict.worst_margin = worst;
  return verdict;
}

}  // namespace acim
