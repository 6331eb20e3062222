// Local linearization: replace a map by a C1-close one that is affine on
// most of a given open set, via greedy disjoint-ball packing and bump-blended
// first-order patches. d = 1 throughout (the pipeline's setting).

#pragma once

#include <vector>

#include "acim/geometry.hpp"
#include "acim/maps.hpp"
#include "acim/rational.hpp"

namespace acim {

struct VitaliCover {
  BoxSet target;                // U
  std::vector<Interval> balls;  // closed, pairwise separated, inside U
  Rat gamma;
  Rat covered;                  // exact total length of the balls
  Rat fraction;                 // covered / m(U) (1 when U is empty)
  Rat r_used;                   // largest radius actually placed
  bool r0_shrunk = false;       // r0 did not fit some component
};

// Greedy left-to-right packing by closed balls of radius < r0 covering more
// than (1 - gamma/2) of U, verified exactly.
VitaliCover vitali_cover(const BoxSet& U, const Rat& gamma, const Rat& r0);

struct LinearizeResult {
  PatchedMap map;   // equals f outside U, affine on V
  BoxSet V;
  Rat ratio;        // m(V)/m(U), exact
  Rat c1_upper;     // certified C1 distance bound to f
  VitaliCover cover;
};

// Lemma-style linearization with the coupling (1-delta)^d > 1 - gamma/2
// enforced as a precondition (d = 1 here: delta < gamma/2). Balls never
// cross branch boundaries or mod-1 value wraps; affine branches contribute
// zero-defect regions without patches.
LinearizeResult linearize_on(const CircleMap& f, const BoxSet& U,
                             const Rat& gamma, const Rat& r0, const Rat& delta);

// True iff the map coincides with a single affine map on every component
// of V (exact coefficient comparison / flat-zone containment).
bool check_locally_linear(const PatchedMap& ft, const BoxSet& V);

}  // namespace acim
