#include "doctest.h"

#include "acim/errors.hpp"
#include "acim/slicing.hpp"
#include "test_util.hpp"

using namespace acim;
using testutil::Rng;

namespace {

MatQ mat2(const Rat& a, const Rat& b, const Rat& c, const Rat& d) {
  MatQ m(2);
  m.at(0, 0) = a;
  m.at(0, 1) = b;
  m.at(1, 0) = c;
  m.at(1, 1) = d;
  return m;
}

MatQ random_invertible_2x2(Rng& rng) {
  while (true) {
    MatQ m(2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        long num = rng.uniform(33) - 16;  // [-16, 16]
        long den = 1 + rng.uniform(8);
        Rat e = frac(num, den);
        if (e > 2) e = Rat(2);
        if (e < -2) e = Rat(-2);
        m.at(i, j) = e;
      }
    if (m.det() == 0) continue;
    // crude exact condition bound: ||M||_F ||M^-1||_F <= 10
    Rat f1(0), f2(0);
    MatQ inv = m.inverse();
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        f1 += m.at(i, j) * m.at(i, j);
        f2 += inv.at(i, j) * inv.at(i, j);
      }
    if (f1 * f2 <= 100) return m;
  }
}

}  // namespace

TEST_SUITE_BEGIN("slicing");

TEST_CASE("kappa calculus") {
  CHECK(compute_kappa(frac(1, 2), frac(1, 2)) == frac(19, 20));
  CHECK((1 - frac(19, 20)) * 5 == frac(1, 4));  // strict headroom
  CHECK(compute_kappa(frac(3, 10), frac(2, 5)) == frac(39, 40));
  CHECK(compute_kappa(Rat(10), frac(1, 2)) == frac(1, 2));  // vacuous branch
}

TEST_CASE("k calculus") {
  CHECK(compute_k(frac(19, 20), frac(1, 2)) == 1);
  CHECK(compute_k(frac(39, 40), frac(2, 5)) == 17);
  CHECK(compute_k(frac(9, 10), frac(3, 5)) == 1);  // ratio >= 1
}

TEST_CASE("normalization in dimension 1") {
  std::vector<MatQ> L;
  for (long a : {2, 3, 2}) {
    MatQ m(1);
    m.at(0, 0) = Rat(a);
    L.push_back(m);
  }
  NormalizedSeq s = normalize_sequence(L);
  CHECK(s.alpha[0] == 1);
  CHECK(s.alpha[1] == frac(1, 2));
  CHECK(s.alpha[2] == frac(1, 6));
  CHECK(s.alpha[3] == frac(1, 12));
}

TEST_CASE("block-triangular sequences need no rotation") {
  std::vector<MatQ> L{mat2(Rat(2), frac(1, 3), Rat(0), frac(1, 2)),
                      mat2(frac(-3, 2), Rat(1), Rat(0), Rat(3))};
  NormalizedSeq s = normalize_sequence(L);
  CHECK(s.R[0] == MatQ::identity(2));
  CHECK(s.R[1] == MatQ::identity(2));
  CHECK(s.Lt[1] == L[0]);
  CHECK(s.beta[1] == Rat(2));       // |<L1^-1 e2, e2>| = 1/(1/2)
  CHECK(s.beta[2] == frac(1, 3));
  CHECK(s.alpha[2] == frac(2, 3));
}

TEST_CASE("general d=2 sequences get exact conformal normalization") {
  Rng rng(77);
  for (int t = 0; t < 25; ++t) {
    std::vector<MatQ> L{random_invertible_2x2(rng), random_invertible_2x2(rng)};
    NormalizedSeq s = normalize_sequence(L);
    for (int i = 1; i <= 2; ++i) {
      CHECK(s.Lt[i].at(1, 0) == 0);            // hyperplane preserved
      CHECK(s.LtInv[i].at(1, 0) == 0);
      CHECK(s.alpha[i] == s.alpha[i - 1] * s.beta[i]);
      // conformality: R R^T is a multiple of the identity
      const MatQ& R = s.R[i];
      CHECK(R.at(0, 0) == R.at(1, 1));
      CHECK(R.at(0, 1) == -R.at(1, 0));
    }
  }
}

TEST_CASE("tau0: dimension-1 sentinel and explicit d=2 values") {
  std::vector<MatQ> L1{[] {
    MatQ m(1);
    m.at(0, 0) = Rat(2);
    return m;
  }()};
  NormalizedSeq s1 = normalize_sequence(L1);
  CHECK(compute_tau0(s1, Rat(2), frac(2, 5), frac(3, 10)) == 1);

  // identity sequence: cube ball, unit comparison constant, no shear
  std::vector<MatQ> LI{MatQ::identity(2), MatQ::identity(2)};
  NormalizedSeq sI = normalize_sequence(LI);
  Rat lambda = frac(33, 32);
  CHECK(compute_tau0(sI, lambda, frac(2, 5), frac(3, 10)) ==
        rat_pow(lambda, -4));

  // diagonal stretch: the threshold picks up both the ball and the height
  std::vector<MatQ> LD{mat2(Rat(2), Rat(0), Rat(0), frac(1, 2))};
  NormalizedSeq sD = normalize_sequence(LD);
  CHECK(sD.alpha[1] == Rat(2));
  CHECK(compute_tau0(sD, lambda, frac(2, 5), frac(3, 10)) ==
        rat_pow(lambda, -2) * frac(1, 4));
}

TEST_CASE("plan assembly and the lambda power inequality") {
  Rng rng(5);
  std::vector<MatQ> L;
  for (int i = 0; i < 18; ++i) L.push_back(random_invertible_2x2(rng));
  NormalizedSeq s = normalize_sequence(L);
  SlicingPlan p = make_plan(s, frac(3, 10), frac(2, 5));
  CHECK(p.k == 17);
  CHECK(p.kappa == frac(39, 40));
  CHECK(rat_pow(p.lambda, 3L * s.n) < (1 - p.delta / 2) / (1 - p.delta));
  CHECK(p.lambda > 1);
  CHECK(p.tau > 0);
  CHECK(p.tau < p.tau0);
}

TEST_CASE("compressor closed form") {
  std::vector<MatQ> LI{MatQ::identity(2), MatQ::identity(2)};
  NormalizedSeq s = normalize_sequence(LI);
  SlicingPlan p = make_plan(s, frac(1, 2), frac(1, 2));
  Compressor c = build_compressor(1, s, p);

  SUBCASE("identity outside the support") {
    std::vector<Rat> far{Rat(2), Rat(0)};
    CHECK(c.evaluate(far) == far);
    std::vector<Rat> high{Rat(0), c.alpha_i * c.tau * 2};
    CHECK(c.evaluate(high) == high);
    CHECK(!c.inside_support(far));
  }

  SUBCASE("pure vertical compression on the axis and the flat zone") {
    Rat t = c.alpha_i * c.tau / 100;
    std::vector<Rat> x{Rat(0), t};
    auto y = c.evaluate(x);
    CHECK(y[0] == 0);
    CHECK(y[1] == c.kappa * t);
    MatQ J = c.jacobian(x);
    CHECK(J.at(0, 0) == 1);
    CHECK(J.at(1, 1) == c.kappa);
    CHECK(J.at(1, 0) == 0);
    CHECK(J.at(0, 1) == 0);
  }

  SUBCASE("box action in the flat region: heights multiply by kappa") {
    // gauge(z) <= (1 - delta/2) lambda^-n and |t| <= (1-delta/2) alpha tau
    Rat z = (1 - p.delta / 2) / p.lambda_n / 2;
    Rat t = (1 - p.delta / 2) * c.alpha_i * c.tau * frac(3, 4);
    std::vector<Rat> x{z, t};
    auto y = c.evaluate(x);
    CHECK(y[0] == z);
    CHECK(y[1] == c.kappa * t);
  }
}

TEST_CASE("compressors depend only on the sequence prefix") {
  Rng rng(13);
  std::vector<MatQ> shared;
  for (int i = 0; i < 3; ++i) shared.push_back(random_invertible_2x2(rng));
  std::vector<MatQ> LA = shared, LB = shared;
  LA.push_back(random_invertible_2x2(rng));
  LB.push_back(random_invertible_2x2(rng));
  NormalizedSeq sA = normalize_sequence(LA);
  NormalizedSeq sB = normalize_sequence(LB);
  CHECK(sA.prefix_equal(sB, 3));
  SlicingPlan pA = make_plan(sA, frac(1, 2), frac(1, 2));
  SlicingPlan pB = make_plan(sB, frac(1, 2), frac(1, 2));
  // equalize the free parameters that depend on the full sequence
  pB.lambda = pA.lambda;
  pB.lambda_n = pA.lambda_n;
  pB.tau = pA.tau;
  for (int i = 1; i <= 3; ++i)
    CHECK(build_compressor(i, sA, pA) == build_compressor(i, sB, pB));
}

TEST_CASE("jacobian stays eps-close to the identity") {
  Rng rng(29);
  std::vector<MatQ> L;
  for (int i = 0; i < 18; ++i) L.push_back(random_invertible_2x2(rng));
  NormalizedSeq s = normalize_sequence(L);
  SlicingPlan p = make_plan(s, frac(3, 10), frac(2, 5));
  for (int i : {1, 9, 18}) {
    Compressor c = build_compressor(i, s, p);
    JacobianVerdict v = check_jacobian_near_id(c, p.eps, 2000, 42);
    CHECK(v.pass);
    CHECK(v.max_deviation < 0.3);
    CHECK(v.max_fd_mismatch < 1e-3);
  }
}

TEST_CASE("shrink verification in dimension 1 matches the scalar arithmetic") {
  std::vector<MatQ> L;
  for (int i = 0; i < 4; ++i) {
    MatQ m(1);
    m.at(0, 0) = Rat(2);
    L.push_back(m);
  }
  NormalizedSeq s = normalize_sequence(L);
  SlicingPlan p = make_plan(s, frac(1, 2), frac(1, 2));
  REQUIRE(p.k == 1);
  ShrinkVerdict v = verify_shrink(s, p, 2, 500, 7);
  CHECK(v.pass);
  // exact scalar margin: 1 - kappa (1-delta)/delta = 1 - 19/20 = 1/20
  CHECK(v.worst_margin == doctest::Approx(0.05).epsilon(1e-6));

  Rat bad_tau = p.tau0 * 2;
  CHECK_THROWS_AS(verify_shrink(s, p, 2, 10, 7, &bad_tau), precondition_error);
}

TEST_CASE("shrink verification for d=2 sequences") {
  Rng rng(59);
  std::vector<MatQ> L;
  for (int i = 0; i < 18; ++i) L.push_back(random_invertible_2x2(rng));
  NormalizedSeq s = normalize_sequence(L);
  SlicingPlan p = make_plan(s, frac(3, 10), frac(2, 5));
  ShrinkVerdict v = verify_shrink(s, p, 17, 800, 3);
  CHECK(v.pass);
  CHECK(v.worst_margin > 0);
  ShrinkVerdict v18 = verify_shrink(s, p, 18, 800, 3);
  CHECK(v18.pass);
  CHECK_THROWS_AS(verify_shrink(s, p, 5, 10, 3), input_error);
}

TEST_CASE("d=1 compressor agrees with the degenerate d=2 vertical action") {
  std::vector<MatQ> L2{mat2(Rat(1), Rat(0), Rat(0), frac(1, 2)),
                       mat2(Rat(1), Rat(0), Rat(0), Rat(3))};
  NormalizedSeq s2 = normalize_sequence(L2);
  SlicingPlan p2 = make_plan(s2, frac(1, 2), frac(1, 2));

  std::vector<MatQ> L1;
  for (const auto& m : L2) {
    MatQ q(1);
    q.at(0, 0) = m.at(1, 1);
    L1.push_back(q);
  }
  NormalizedSeq s1 = normalize_sequence(L1);
  SlicingPlan p1 = p2;  // same kappa, bump, tau; lambda unused in d=1
  for (int i = 1; i <= 2; ++i) {
    Compressor c2 = build_compressor(i, s2, p2);
    Compressor c1 = build_compressor(i, s1, p1);
    for (int j = -3; j <= 3; ++j) {
      Rat t = c2.alpha_i * c2.tau * frac(j, 4);
      std::vector<Rat> x2{Rat(0), t};
      std::vector<Rat> x1{t};
      CHECK(c2.evaluate(x2)[1] == c1.evaluate(x1)[0]);
    }
  }
}

TEST_SUITE_END();
