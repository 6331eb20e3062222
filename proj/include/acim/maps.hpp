// Piecewise representations of the self-maps being perturbed.
//
// A CircleMap is a list of branches whose domains partition [0,1); branches
// are polynomials with rational coefficients (degree 1 = affine). Affine-only
// maps are "exact mode": preimages and images of interval sets are computed
// exactly, which is what the tower and pipeline constructions consume.
// Polynomial branches admit exact pointwise evaluation plus certified
// derivative/second-derivative bounds, and are used as smooth surrogates for
// the linearization demonstrations.
//
// A PatchedMap is a CircleMap with finitely many local C1 modifications on
// pairwise-disjoint supports: blended affine replacements (linearization) and
// pre-composed vertical compressors. Patches carry closed-form C1-distance
// bounds to the unpatched map.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "acim/geometry.hpp"
#include "acim/rational.hpp"

#include "json.hpp"

namespace acim {

// Fixed C1 bump profile: rho(x) = 1 for |x| <= 1-delta, 0 for |x| >= 1,
// cubic smoothstep on each shoulder. sup |rho'| = 3/(2 delta), strictly
// inside the 2/delta budget the compressor estimates need.
struct Bump {
  Rat delta;

  explicit Bump(const Rat& d);
  Rat value(const Rat& x) const;
  Rat derivative(const Rat& x) const;
  double value_d(double x) const;
  double derivative_d(double x) const;
  Rat sup_derivative() const { return Rat(3) / (2 * delta); }
};

struct Branch {
  Rat lo, hi;              // domain [lo, hi)
  std::vector<Rat> coeffs; // value = sum coeffs[k] * x^k, before mod-1 wrap

  bool affine() const { return coeffs.size() <= 2; }
  Rat slope() const;   // affine only
  Rat offset() const;  // affine only
  Rat eval_raw(const Rat& x) const;
  Rat deriv_raw(const Rat& x) const;
  double eval_raw_d(double x) const;
  double deriv_raw_d(double x) const;
  // certified sup of |p'|, |p''| over the domain (degree <= 3)
  Rat sup_abs_deriv() const;
  Rat sup_abs_second() const;
};

class CircleMap {
 public:
  CircleMap() = default;
  CircleMap(std::vector<Branch> branches, bool mod1);

  static CircleMap doubling();
  static CircleMap affine_expanding(long slope);  // x -> slope x mod 1
  static CircleMap rotation(const Rat& offset);
  static CircleMap halving();  // x -> x/2 on [0,1], mod1 = false

  const std::vector<Branch>& branches() const { return branches_; }
  bool mod1() const { return mod1_; }
  bool exact_mode() const;  // all branches affine
  bool expanding() const;   // all |slopes| > 1 (affine branches)

  // sum over branches of 1/|slope| (affine only): the non-singularity
  // constant; measure(f^{-1} S) <= sigma * measure(S).
  Rat nonsingularity_constant() const;

  Rat evaluate(const Rat& x) const;
  // Throws precondition_error when queried exactly at a non-C1 break point.
  Rat derivative(const Rat& x) const;
  double evaluate_d(double x) const;
  double derivative_d(double x) const;

  std::size_t branch_index(const Rat& x) const;

  nlohmann::json to_json() const;
  static CircleMap from_json(const nlohmann::json& j);

 private:
  std::vector<Branch> branches_;
  bool mod1_ = true;
};

// Exact preimage of an interval set under an exact-mode map.
BoxSet preimage(const CircleMap& f, const BoxSet& s);
// Exact forward image for exact-mode maps.
BoxSet image(const CircleMap& f, const BoxSet& s);

// All periodic points of period <= period_max for exact-mode maps.
// Throws input_error if some composition piece is the identity (continuum of
// fixed points) and resource_error if the piece budget is exhausted.
std::vector<Rat> find_periodic_points(const CircleMap& f, int period_max,
                                      std::size_t piece_budget = 2000000);

struct Patch {
  enum class Kind { linearize, compress };
  Kind kind;
  Rat center;
  Rat radius;      // support = [center - radius, center + radius]
  Bump bump;       // shoulder parameter of the blending profile

  // linearize: value = f(x) + rho((x-c)/r) [fc + dfc (x-c) - f(x)], where f
  // is the raw (unwrapped) value of the branch the patch sits in
  Rat fc, dfc;
  int branch = -1;

  // compress: g = f(h(x)), h(x) = c + t (1 - (1-kappa) rho(t/r)), t = x-c
  Rat kappa;

  Rat c1_bound;    // certified C1 distance to the unpatched map

  Rat h_value(const Rat& x) const;   // compress: h(x)
  Rat h_deriv(const Rat& x) const;
};

class PatchedMap {
 public:
  explicit PatchedMap(CircleMap base) : base_(std::move(base)) {}
  PatchedMap(CircleMap base, std::vector<Patch> patches);

  const CircleMap& base() const { return base_; }
  const std::vector<Patch>& patches() const { return patches_; }

  Rat evaluate(const Rat& x) const;
  Rat derivative(const Rat& x) const;
  double evaluate_d(double x) const;
  double derivative_d(double x) const;

  // Exact forward image of an interval set (splits at branch and patch
  // boundaries; every piece is monotone with closed-form endpoint values).
  BoxSet image(const BoxSet& s) const;
  BoxSet image_iterate(const BoxSet& s, int n) const;

  // Sum of patch C1 bounds... patches have disjoint supports, so the
  // C1 distance to the bare base is the max of the per-patch bounds.
  Rat c1_bound_to_base() const;

  nlohmann::json to_json() const;
  static PatchedMap from_json(const nlohmann::json& j);

 private:
  CircleMap base_;
  std::vector<Patch> patches_;  // sorted by support, pairwise disjoint
  const Patch* find_patch(const Rat& x) const;
  const Patch* find_patch_d(double x) const;
  std::vector<double> patch_centers_d_;
};

// Grid lower bound for the C1 distance: max over grid points of
// |f-g| + |f'-g'| (break points skipped), computed exactly.
Rat c1_distance_lower(const PatchedMap& f, const PatchedMap& g, int grid_n);

// Certified upper bound for the C1 distance. Supported cases: identical
// bases with patches on disjoint supports, and bases sharing identical
// branch domains (branchwise polynomial difference bounds).
Rat c1_distance_bound(const PatchedMap& f, const PatchedMap& g);

}  // namespace acim
