// Exact set algebra for finite unions of closed axis-aligned boxes with
// rational endpoints.
//
// Dimension 1 is the workhorse representation (sorted disjoint segments,
// adjacent segments merged); it backs every measure ledger in the tower and
// pipeline constructions. Dimensions >= 2 use a box-splitting algebra kept in
// pairwise interior-disjoint form; they are exercised by the slicing module's
// verification paths only.
//
// Conventions: boxes are closed; canonicalization drops measure-zero
// (degenerate) boxes, and set differences return a closed over-approximation
// that differs from the true difference by a Lebesgue-null set. All values
// are immutable after construction and all operations are pure.

#pragma once

#include <string>
#include <vector>

#include "acim/rational.hpp"

#include "json.hpp"

namespace acim {

struct Interval {
  Rat lo, hi;  // lo <= hi
};

using Box = std::vector<Interval>;  // one Interval per axis

Rat box_measure(const Box& b);

class BoxSet {
 public:
  BoxSet() : dim_(1) {}
  explicit BoxSet(int dim);

  static BoxSet empty(int dim = 1);
  static BoxSet unit(int dim = 1);
  // Single segment [lo, hi] in d=1.
  static BoxSet segment(const Rat& lo, const Rat& hi);
  // Arbitrary boxes, canonicalized (d=1: sorted/merged; d>=2: made pairwise
  // interior-disjoint).
  static BoxSet from_boxes(int dim, const std::vector<Box>& boxes);
  // Fast path: caller guarantees segments are sorted, positive length, and
  // pairwise separated (no touching endpoints). Verified in debug builds.
  static BoxSet from_sorted_segments(std::vector<Interval> segs);

  int dim() const { return dim_; }
  bool is_empty() const;
  std::size_t component_count() const;

  const std::vector<Interval>& segments() const;  // d == 1 only
  std::vector<Box> boxes() const;                 // any dim (copies in d=1)

  Rat measure() const;

  // Smallest closed box containing the set; empty set has no hull.
  bool bounding_box(Box& out) const;

  bool operator==(const BoxSet& other) const;  // representation equality

 private:
  int dim_;
  std::vector<Interval> segs_;      // d == 1 canonical storage
  std::vector<Box> boxes_;          // d >= 2 canonical storage
  friend BoxSet box_union(const BoxSet&, const BoxSet&);
  friend BoxSet intersect(const BoxSet&, const BoxSet&);
  friend BoxSet subtract(const BoxSet&, const BoxSet&);
};

BoxSet box_union(const BoxSet& a, const BoxSet& b);
BoxSet intersect(const BoxSet& a, const BoxSet& b);
// Closed over-approximation of a \ b; measure is exactly
// measure(a) - measure(intersect(a, b)).
BoxSet subtract(const BoxSet& a, const BoxSet& b);
// Complement inside [0,1]^d; requires a subset of the unit box.
BoxSet complement_in_unit(const BoxSet& a);

// measure(intersect(a, b)) without materializing the intersection (d=1 uses
// a two-pointer sweep; d>=2 falls back to intersect()).
Rat intersection_measure(const BoxSet& a, const BoxSet& b);

inline bool interiors_disjoint(const BoxSet& a, const BoxSet& b) {
  return intersection_measure(a, b) == 0;
}

// b subset of a, modulo null sets.
bool contains_mod_null(const BoxSet& a, const BoxSet& b);

// Smallest distance between the two closed sets (d=1). Returns false when
// either set is empty (gap undefined / infinite). gap == 0 iff the closures
// meet.
bool min_gap(const BoxSet& a, const BoxSet& b, Rat& gap_out);

// Point membership (closed sets).
bool contains_point(const BoxSet& a, const std::vector<Rat>& x);

nlohmann::json boxset_to_json(const BoxSet& a);
BoxSet boxset_from_json(const nlohmann::json& j);

}  // namespace acim
