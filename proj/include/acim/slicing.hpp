// The parameter calculus and compressor diffeomorphisms for perturbing a
// sequence of linear isomorphisms so that thin boxes flatten into slabs:
// kappa and k from the derivative budget, hyperplane normalization of the
// matrix sequence, the tau0 threshold, the compressors H_i, and sampling
// verification of the composed shrink inclusion.
//
// Dimension 1 needs no normalization and any positive tau works. Dimension 2
// is fully exact: hyperplane-fixing changes of coordinates are realized as
// rational conformal (scaled-rotation) matrices, so no approximate
// orthogonalization enters the chain. Higher dimensions are accepted exactly
// when every matrix already preserves the horizontal hyperplane
// (block-triangular form); general position in d >= 3 would need irrational
// rotations and is out of scope.

#pragma once

#include <cstdint>
#include <vector>

#include "acim/dinterval.hpp"
#include "acim/maps.hpp"
#include "acim/rational.hpp"

#include "json.hpp"

namespace acim {

class MatQ {
 public:
  MatQ() : d_(0) {}
  explicit MatQ(int d) : d_(d), e_(d * d, Rat(0)) {}
  static MatQ identity(int d);

  int dim() const { return d_; }
  Rat& at(int i, int j) { return e_[i * d_ + j]; }
  const Rat& at(int i, int j) const { return e_[i * d_ + j]; }

  MatQ operator*(const MatQ& o) const;
  std::vector<Rat> apply(const std::vector<Rat>& v) const;
  Rat det() const;
  MatQ inverse() const;  // throws input_error when singular

  bool operator==(const MatQ& o) const { return d_ == o.d_ && e_ == o.e_; }

 private:
  int d_;
  std::vector<Rat> e_;
};

nlohmann::json matq_to_json(const MatQ& m);
MatQ matq_from_json(const nlohmann::json& j);

struct NormalizedSeq {
  int d = 1;
  int n = 0;
  std::vector<MatQ> L;      // input, 1-based at index 1
  std::vector<MatQ> R;      // conformal coordinate changes, R[0..n]
  std::vector<MatQ> Lt;     // normalized maps, hyperplane-preserving
  std::vector<MatQ> LtInv;
  std::vector<Rat> alpha;   // alpha[0] = 1, alpha[i] = |<Lt_i^-1..Lt_1^-1 e_d, e_d>|
  std::vector<Rat> beta;    // beta[i] = |<Lt_i^-1 e_d, e_d>|
  std::vector<MatQ> M;      // ball chain: C_i = M_i [-1,1]^{d-1}
  std::vector<MatQ> MInv;   // gauge_i(v) = ||MInv_i v||_inf
  std::vector<Rat> gauge_cmp;  // sound C with ||v||_*i <= C ||v||_2

  Rat gauge(int i, const std::vector<Rat>& z) const;   // d >= 2
  DI gauge_di(int i, const std::vector<DI>& z) const;

  // prefix data equality (the "depends only on L_1..L_i" invariant)
  bool prefix_equal(const NormalizedSeq& o, int upto) const;
};

// kappa in (0,1) with (1-kappa)(1+2/delta) < eps, chosen midway between the
// critical value and 1; 1/2 when the constraint is vacuous.
Rat compute_kappa(const Rat& eps, const Rat& delta);

// least k with kappa^k < delta/(1-delta)
int compute_k(const Rat& kappa, const Rat& delta);

NormalizedSeq normalize_sequence(const std::vector<MatQ>& L);

struct SlicingPlan {
  Rat eps, delta;
  Rat kappa;
  int k = 1;
  Rat bump_delta;  // delta/2: shoulder width of the compressor profile
  Rat lambda;      // rational > 1 with lambda^{3n} < (1-delta)^{-1}(1-delta/2)
  Rat lambda_n;    // lambda^n, exact
  Rat tau0;
  Rat tau;         // default tau0/2
  int n = 0;

  nlohmann::json to_json() const;
};

// tau0 = lambda^{-2n} min_i min(tau*_i, tau'_i)/alpha-scaling. In d = 1 any
// positive value works; the configured default 1 is returned.
Rat compute_tau0(const NormalizedSeq& seq, const Rat& lambda, const Rat& delta,
                 const Rat& eps);

SlicingPlan make_plan(const NormalizedSeq& seq, const Rat& eps, const Rat& delta);

struct Compressor {
  int i = 0;
  int d = 1;
  Rat kappa;
  Rat bump_delta;
  Rat lambda_n;
  Rat tau;
  Rat alpha_i;
  MatQ MInv_i;     // empty in d = 1

  // H(z,t) = (z, t [1 - (1-kappa) rho(t/(alpha_i tau)) rho(lambda^n ||z||_*i)])
  std::vector<Rat> evaluate(const std::vector<Rat>& x) const;
  std::vector<DI> evaluate_di(const std::vector<DI>& x) const;
  MatQ jacobian(const std::vector<Rat>& x) const;
  bool inside_support(const std::vector<Rat>& x) const;

  bool operator==(const Compressor& o) const;
};

Compressor build_compressor(int i, const NormalizedSeq& seq, const SlicingPlan& plan);

inline std::vector<Rat> evaluate_H(const Compressor& c, const std::vector<Rat>& x) {
  return c.evaluate(x);
}
inline MatQ jacobian_H(const Compressor& c, const std::vector<Rat>& x) {
  return c.jacobian(x);
}

struct JacobianVerdict {
  bool pass = false;
  int samples_checked = 0;
  double max_deviation = 0;          // sup over samples of ||DH - id||_op
  double max_fd_mismatch = 0;        // exact-vs-finite-difference cross-check
  std::vector<Rat> witness;          // a point with deviation >= eps, if any
};

// ||DH(x) - id||_op < eps at quasi-random support points; interval fast path
// with exact rational fallback, plus a central finite-difference cross-check.
JacobianVerdict check_jacobian_near_id(const Compressor& c, const Rat& eps,
                                       int samples, std::uint64_t seed);

struct ShrinkVerdict {
  bool pass = false;
  int i = 0;
  int samples_checked = 0;
  double worst_margin = 0;  // certified lower bound, normalized coordinates
  std::vector<double> counterexample;  // midpoint of the offending enclosure
};

// Checks L_{i-k+1} H_{i-k+1} ... L_i H_i (V_i) inside W_{i-k} on `samples`
// quasi-random points plus all vertices and facet centers of V_i.
// tau_override, when nonnegative, replaces plan.tau and must be < tau0.
ShrinkVerdict verify_shrink(const NormalizedSeq& seq, const SlicingPlan& plan,
                            int i, int samples, std::uint64_t seed,
                            const Rat* tau_override = nullptr);

}  // namespace acim
