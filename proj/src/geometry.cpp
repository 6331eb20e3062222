#include "acim/geometry.hpp"

#include <algorithm>
#include <cassert>

#include "acim/errors.hpp"

namespace acim {

Rat box_measure(const Box& b) {
  Rat m(1);
  for (const auto& iv : b) m *= iv.hi - iv.lo;
  return m;
}

BoxSet::BoxSet(int dim) : dim_(dim) {
  if (dim < 1) throw input_error("BoxSet dimension must be >= 1");
}

BoxSet BoxSet::empty(int dim) { return BoxSet(dim); }

BoxSet BoxSet::unit(int dim) {
  BoxSet s(dim);
  if (dim == 1) {
    s.segs_.push_back({Rat(0), Rat(1)});
  } else {
    s.boxes_.push_back(Box(dim, Interval{Rat(0), Rat(1)}));
  }
  return s;
}

BoxSet BoxSet::segment(const Rat& lo, const Rat& hi) {
  if (lo > hi) throw input_error("segment: lo > hi");
  BoxSet s(1);
  if (lo < hi) s.segs_.push_back({lo, hi});
  return s;
}

namespace {

// Sort + merge overlapping/touching segments; drops degenerate ones.
void canonicalize_segments(std::vector<Interval>& v) {
  std::sort(v.begin(), v.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> out;
  out.reserve(v.size());
  for (auto& iv : v) {
    if (iv.lo >= iv.hi) continue;
    if (!out.empty() && iv.lo <= out.back().hi) {
      if (iv.hi > out.back().hi) out.back().hi = std::move(iv.hi);
    } else {
      out.push_back(std::move(iv));
    }
  }
  v.swap(out);
}

bool box_degenerate(const Box& b) {
  for (const auto& iv : b)
    if (iv.lo >= iv.hi) return true;
  return false;
}

bool boxes_overlap(const Box& a, const Box& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].hi <= b[i].lo || b[i].hi <= a[i].lo) return false;
  }
  return true;
}

// a minus b as up to 2d interior-disjoint fragments (a, b overlapping).
void box_subtract_into(const Box& a, const Box& b, std::vector<Box>& out) {
  Box core = a;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (b[i].lo > core[i].lo) {
      Box left = core;
      left[i].hi = b[i].lo;
      if (!box_degenerate(left)) out.push_back(std::move(left));
      core[i].lo = b[i].lo;
    }
    if (b[i].hi < core[i].hi) {
      Box right = core;
      right[i].lo = b[i].hi;
      if (!box_degenerate(right)) out.push_back(std::move(right));
      core[i].hi = b[i].hi;
    }
  }
  // core is a ∩ b, dropped.
}

std::vector<Box> subtract_boxes(std::vector<Box> frags, const std::vector<Box>& cutters) {
  for (const auto& c : cutters) {
    std::vector<Box> next;
    next.reserve(frags.size());
    for (auto& f : frags) {
      if (boxes_overlap(f, c)) {
        box_subtract_into(f, c, next);
      } else {
        next.push_back(std::move(f));
      }
    }
    frags.swap(next);
  }
  return frags;
}

}  // namespace

BoxSet BoxSet::from_boxes(int dim, const std::vector<Box>& boxes) {
  BoxSet s(dim);
  for (const auto& b : boxes) {
    if ((int)b.size() != dim) throw input_error("box dimension mismatch");
    for (const auto& iv : b)
      if (iv.lo > iv.hi) throw input_error("box with lo > hi");
  }
  if (dim == 1) {
    s.segs_.reserve(boxes.size());
    for (const auto& b : boxes) s.segs_.push_back(b[0]);
    canonicalize_segments(s.segs_);
  } else {
    for (const auto& b : boxes) {
      if (box_degenerate(b)) continue;
      std::vector<Box> frags = subtract_boxes({b}, s.boxes_);
      for (auto& f : frags) s.boxes_.push_back(std::move(f));
    }
  }
  return s;
}

BoxSet BoxSet::from_sorted_segments(std::vector<Interval> segs) {
#ifndef NDEBUG
  for (std::size_t i = 0; i < segs.size(); ++i) {
    assert(segs[i].lo < segs[i].hi);
    if (i) assert(segs[i - 1].hi < segs[i].lo);
  }
#endif
  BoxSet s(1);
  s.segs_ = std::move(segs);
  return s;
}

bool BoxSet::is_empty() const {
  return dim_ == 1 ? segs_.empty() : boxes_.empty();
}

std::size_t BoxSet::component_count() const {
  return dim_ == 1 ? segs_.size() : boxes_.size();
}

const std::vector<Interval>& BoxSet::segments() const {
  if (dim_ != 1) throw input_error("segments() requires dim == 1");
  return segs_;
}

std::vector<Box> BoxSet::boxes() const {
  if (dim_ == 1) {
    std::vector<Box> out;
    out.reserve(segs_.size());
    for (const auto& s : segs_) out.push_back(Box{s});
    return out;
  }
  return boxes_;
}

Rat BoxSet::measure() const {
  Rat m(0);
  if (dim_ == 1) {
    for (const auto& s : segs_) m += s.hi - s.lo;
  } else {
    for (const auto& b : boxes_) m += box_measure(b);
  }
  return m;
}

bool BoxSet::bounding_box(Box& out) const {
  if (is_empty()) return false;
  if (dim_ == 1) {
    out = Box{Interval{segs_.front().lo, segs_.back().hi}};
    return true;
  }
  out = boxes_.front();
  for (const auto& b : boxes_) {
    for (int i = 0; i < dim_; ++i) {
      if (b[i].lo < out[i].lo) out[i].lo = b[i].lo;
      if (b[i].hi > out[i].hi) out[i].hi = b[i].hi;
    }
  }
  return true;
}

bool BoxSet::operator==(const BoxSet& other) const {
  if (dim_ != other.dim_) return false;
  if (dim_ == 1) {
    if (segs_.size() != other.segs_.size()) return false;
    for (std::size_t i = 0; i < segs_.size(); ++i)
      if (segs_[i].lo != other.segs_[i].lo || segs_[i].hi != other.segs_[i].hi)
        return false;
    return true;
  }
  // d >= 2 representation is not unique; compare as sets via measures.
  Rat ma = measure(), mb = other.measure();
  if (ma != mb) return false;
  return intersection_measure(*this, other) == ma;
}

namespace {
void check_same_dim(const BoxSet& a, const BoxSet& b) {
  if (a.dim() != b.dim()) throw input_error("BoxSet dimension mismatch");
}
}  // namespace

BoxSet box_union(const BoxSet& a, const BoxSet& b) {
  check_same_dim(a, b);
  if (a.dim() == 1) {
    // merge two sorted lists, then single canonical pass
    std::vector<Interval> merged;
    merged.reserve(a.segs_.size() + b.segs_.size());
    std::size_t i = 0, j = 0;
    while (i < a.segs_.size() && j < b.segs_.size()) {
      if (a.segs_[i].lo <= b.segs_[j].lo)
        merged.push_back(a.segs_[i++]);
      else
        merged.push_back(b.segs_[j++]);
    }
    for (; i < a.segs_.size(); ++i) merged.push_back(a.segs_[i]);
    for (; j < b.segs_.size(); ++j) merged.push_back(b.segs_[j]);
    std::vector<Interval> out;
    out.reserve(merged.size());
    for (auto& iv : merged) {
      if (iv.lo >= iv.hi) continue;
      if (!out.empty() && iv.lo <= out.back().hi) {
        if (iv.hi > out.back().hi) out.back().hi = std::move(iv.hi);
      } else {
        out.push_back(std::move(iv));
      }
    }
    BoxSet s(1);
    s.segs_ = std::move(out);
    return s;
  }
  BoxSet s(a.dim());
  s.boxes_ = a.boxes_;
  std::vector<Box> extra = subtract_boxes(b.boxes_, a.boxes_);
  for (auto& e : extra) s.boxes_.push_back(std::move(e));
  return s;
}

BoxSet intersect(const BoxSet& a, const BoxSet& b) {
  check_same_dim(a, b);
  BoxSet s(a.dim());
  if (a.dim() == 1) {
    std::size_t i = 0, j = 0;
    while (i < a.segs_.size() && j < b.segs_.size()) {
      const Interval& x = a.segs_[i];
      const Interval& y = b.segs_[j];
      Rat lo = rat_max(x.lo, y.lo);
      Rat hi = rat_min(x.hi, y.hi);
      if (lo < hi) s.segs_.push_back({lo, hi});
      if (x.hi <= y.hi)
        ++i;
      else
        ++j;
    }
    return s;
  }
  for (const auto& x : a.boxes_) {
    for (const auto& y : b.boxes_) {
      if (!boxes_overlap(x, y)) continue;
      Box c(a.dim());
      for (int k = 0; k < a.dim(); ++k)
        c[k] = {rat_max(x[k].lo, y[k].lo), rat_min(x[k].hi, y[k].hi)};
      if (!box_degenerate(c)) s.boxes_.push_back(std::move(c));
    }
  }
  return s;
}

BoxSet subtract(const BoxSet& a, const BoxSet& b) {
  check_same_dim(a, b);
  BoxSet s(a.dim());
  if (a.dim() == 1) {
    s.segs_.reserve(a.segs_.size());
    std::size_t j = 0;  // first b-segment not strictly left of the current piece
    for (const auto& x : a.segs_) {
      while (j < b.segs_.size() && b.segs_[j].hi <= x.lo) ++j;
      Rat cur = x.lo;
      for (std::size_t jj = j; jj < b.segs_.size() && b.segs_[jj].lo < x.hi; ++jj) {
        const Interval& y = b.segs_[jj];
        if (y.lo > cur) s.segs_.push_back({cur, y.lo});
        if (y.hi > cur) cur = y.hi;
        if (cur >= x.hi) break;
      }
      if (cur < x.hi) s.segs_.push_back({cur, x.hi});
    }
    // Emitted pieces are sorted with strict gaps: within one a-segment they
    // are separated by positive-length b-segments, across a-segments by the
    // gaps of a itself.
    return s;
  }
  s.boxes_ = subtract_boxes(a.boxes_, b.boxes_);
  return s;
}

BoxSet complement_in_unit(const BoxSet& a) {
  BoxSet u = BoxSet::unit(a.dim());
  if (a.dim() == 1) {
    const auto& segs = a.segments();
    if (!segs.empty() && (segs.front().lo < 0 || segs.back().hi > 1))
      throw input_error("complement_in_unit: set not inside [0,1]");
  } else {
    for (const auto& b : a.boxes())
      for (const auto& iv : b)
        if (iv.lo < 0 || iv.hi > 1)
          throw input_error("complement_in_unit: set not inside the unit box");
  }
  return subtract(u, a);
}

Rat intersection_measure(const BoxSet& a, const BoxSet& b) {
  check_same_dim(a, b);
  Rat m(0);
  if (a.dim() == 1) {
    const auto& A = a.segments();
    const auto& B = b.segments();
    std::size_t i = 0, j = 0;
    while (i < A.size() && j < B.size()) {
      Rat lo = rat_max(A[i].lo, B[j].lo);
      Rat hi = rat_min(A[i].hi, B[j].hi);
      if (lo < hi) m += hi - lo;
      if (A[i].hi <= B[j].hi)
        ++i;
      else
        ++j;
    }
    return m;
  }
  return intersect(a, b).measure();
}

bool contains_mod_null(const BoxSet& a, const BoxSet& b) {
  return intersection_measure(a, b) == b.measure();
}

bool min_gap(const BoxSet& a, const BoxSet& b, Rat& gap_out) {
  if (a.dim() != 1 || b.dim() != 1)
    throw input_error("min_gap implemented for dim 1");
  if (a.is_empty() || b.is_empty()) return false;
  const auto& A = a.segments();
  const auto& B = b.segments();
  bool have = false;
  Rat best(0);
  std::size_t i = 0, j = 0;
  while (i < A.size() && j < B.size()) {
    Rat gap;
    if (A[i].hi < B[j].lo)
      gap = B[j].lo - A[i].hi;
    else if (B[j].hi < A[i].lo)
      gap = A[i].lo - B[j].hi;
    else {
      gap_out = 0;
      return true;
    }
    if (!have || gap < best) {
      best = gap;
      have = true;
    }
    if (A[i].hi < B[j].hi)
      ++i;
    else
      ++j;
  }
  gap_out = best;
  return true;
}

bool contains_point(const BoxSet& a, const std::vector<Rat>& x) {
  if ((int)x.size() != a.dim()) throw input_error("point dimension mismatch");
  if (a.dim() == 1) {
    // binary search over sorted segments
    const auto& segs = a.segments();
    std::size_t lo = 0, hi = segs.size();
    while (lo < hi) {
      std::size_t mid = (lo + hi) / 2;
      if (segs[mid].hi < x[0])
        lo = mid + 1;
      else
        hi = mid;
    }
    return lo < segs.size() && segs[lo].lo <= x[0] && x[0] <= segs[lo].hi;
  }
  for (const auto& b : a.boxes()) {
    bool in = true;
    for (int i = 0; i < a.dim() && in; ++i)
      in = b[i].lo <= x[i] && x[i] <= b[i].hi;
    if (in) return true;
  }
  return false;
}

nlohmann::json boxset_to_json(const BoxSet& a) {
  nlohmann::json j;
  j["dim"] = a.dim();
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& b : a.boxes()) {
    nlohmann::json jb = nlohmann::json::array();
    for (const auto& iv : b)
      jb.push_back({rat_str(iv.lo), rat_str(iv.hi)});
    arr.push_back(jb);
  }
  j["boxes"] = arr;
  return j;
}

BoxSet boxset_from_json(const nlohmann::json& j) {
  int dim = j.at("dim").get<int>();
  std::vector<Box> boxes;
  for (const auto& jb : j.at("boxes")) {
    Box b;
    for (const auto& jiv : jb)
      b.push_back({parse_rat(jiv.at(0).get<std::string>()),
                   parse_rat(jiv.at(1).get<std::string>())});
    boxes.push_back(std::move(b));
  }
  return BoxSet::from_boxes(dim, boxes);
}

}  // namespace acim
