#include "acim/linearize.hpp"

#include <algorithm>

#include "acim/errors.hpp"

namespace acim {

namespace {

// pack one component [a,b] with closed balls of radius r, end margin e,
// inter-ball gap g; returns centers
void pack_component(const Rat& a, const Rat& b, const Rat& r, const Rat& e,
                    const Rat& g, std::vector<Interval>& out) {
  Rat pos = a + e;
  while (pos + 2 * r + e <= b) {
    out.push_back({pos, pos + 2 * r});
    pos += 2 * r + g;
  }
}

}  // namespace

VitaliCover vitali_cover(const BoxSet& U, const Rat& gamma, const Rat& r0) {
  if (U.dim() != 1) throw input_error("vitali_cover: dim 1 only");
  if (!(gamma > 0 && gamma < 1)) throw input_error("gamma must be in (0,1)");
  if (!(r0 > 0)) throw input_error("r0 must be positive");

  VitaliCover cover;
  cover.target = U;
  cover.gamma = gamma;
  cover.covered = Rat(0);
  cover.fraction = Rat(1);
  cover.r_used = Rat(0);
  if (U.is_empty()) return cover;

  Rat mU = U.measure();
  Rat target = (1 - gamma / 2) * mU;

  Rat r = r0 * frac(63, 64);  // radii strictly below r0
  for (int attempt = 0; attempt < 64; ++attempt, r /= 2) {
    std::vector<Interval> balls;
    Rat covered(0);
    Rat rmax(0);
    for (const auto& seg : U.segments()) {
      Rat len = seg.hi - seg.lo;
      Rat rc = r;
      bool shrunk = false;
      if (!(4 * rc < len)) {
        // component too short for the requested radius: one centered ball
        rc = len * (1 - gamma / 8) / 2;
        shrunk = true;
      }
      Rat e = rc * gamma / 8;
      Rat g = rc * gamma / 8;
      std::size_t before = balls.size();
      pack_component(seg.lo, seg.hi, rc, e, g, balls);
      if (balls.size() == before && len > 0) {
        // even the shrunken ball failed (tiny component): take the middle half
        Rat q = len / 4;
        balls.push_back({seg.lo + q, seg.hi - q});
      }
      for (std::size_t i = before; i < balls.size(); ++i) {
        covered += balls[i].hi - balls[i].lo;
        rmax = rat_max(rmax, (balls[i].hi - balls[i].lo) / 2);
      }
      if (shrunk) cover.r0_shrunk = true;
    }
    if (covered > target) {
      cover.balls = std::move(balls);
      cover.covered = covered;
      cover.fraction = covered / mU;
      cover.r_used = rmax;
      return cover;
    }
  }
  throw resource_error("vitali_cover: packing could not reach 1 - gamma/2");
}

LinearizeResult linearize_on(const CircleMap& f, const BoxSet& U,
                             const Rat& gamma, const Rat& r0, const Rat& delta) {
  if (!(delta > 0 && delta < 1)) throw input_error("delta must be in (0,1)");
  if (!(1 - delta > 1 - gamma / 2))
    throw precondition_error("need (1-delta)^d > 1 - gamma/2");

  // balls must not cross branch boundaries or raw-value integer crossings
  // (mod-1 wrap points), so cut U accordingly before packing
  std::vector<Box> cut_boxes;
  for (const auto& br : f.branches()) {
    BoxSet dom = BoxSet::segment(br.lo, br.hi);
    BoxSet piece = intersect(U, dom);
    if (piece.is_empty()) continue;
    std::vector<Rat> wraps;
    if (f.mod1() && br.affine()) {
      // solve slope x + offset = integer inside [lo, hi]
      Rat a = br.slope(), c = br.offset();
      if (a != 0) {
        Rat v1 = a * br.lo + c, v2 = a * br.hi + c;
        Rat vmin = rat_min(v1, v2), vmax = rat_max(v1, v2);
        for (long w = rat_floor_long(vmin); w <= rat_floor_long(vmax) + 1; ++w) {
          Rat x = (Rat(w) - c) / a;
          if (br.lo < x && x < br.hi) wraps.push_back(x);
        }
      }
    } else if (f.mod1()) {
      // monotone polynomial branch: locate integer crossings by bisection on
      // the exact polynomial (derivative has constant sign on the branch)
      Rat v1 = br.eval_raw(br.lo), v2 = br.eval_raw(br.hi);
      Rat vmin = rat_min(v1, v2), vmax = rat_max(v1, v2);
      for (long w = rat_floor_long(vmin) + 1; Rat(w) < vmax; ++w) {
        Rat lo = br.lo, hi = br.hi;
        bool increasing = v2 > v1;
        for (int it = 0; it < 80; ++it) {
          Rat mid = (lo + hi) / 2;
          bool below = br.eval_raw(mid) < Rat(w);
          if (below == increasing)
            lo = mid;
          else
            hi = mid;
        }
        wraps.push_back(lo);
        wraps.push_back(hi);  // enclosing bracket; both become cuts
      }
    }
    std::sort(wraps.begin(), wraps.end());
    BoxSet cuts = BoxSet::empty(1);
    for (const auto& wx : wraps) {
      Rat pad = rat_min(r0 / 8, Rat(1, 1024));
      cuts = box_union(cuts, BoxSet::segment(wx - pad, wx + pad));
    }
    BoxSet safe = subtract(piece, cuts);
    for (const auto& bb : safe.boxes()) cut_boxes.push_back(bb);
  }
  BoxSet U_cut = BoxSet::from_boxes(1, cut_boxes);

  VitaliCover cover = vitali_cover(U_cut, gamma, r0);
  // the wrap padding removed a little of U; the packing target must still be
  // met relative to the original U
  if (!(cover.covered > (1 - gamma / 2) * U.measure())) {
    // retry with finer padding via smaller r0 is pointless here: the pad is
    // already r0/8; fail loudly
    throw resource_error("linearize_on: wrap padding ate the packing margin");
  }

  std::vector<Patch> patches;
  std::vector<Box> v_boxes;
  Rat c1_upper(0);
  Bump profile(delta);
  for (const auto& ball : cover.balls) {
    Rat p = (ball.lo + ball.hi) / 2;
    Rat r = (ball.hi - ball.lo) / 2;
    std::size_t bi = f.branch_index(p);
    const Branch& br = f.branches()[bi];
    // inner affine zone
    v_boxes.push_back(Box{Interval{p - (1 - delta) * r, p + (1 - delta) * r}});
    if (br.affine()) continue;  // already locally linear, no patch needed
    Rat dfp = br.deriv_raw(p);
    if (dfp == 0)
      throw precondition_error("critical center (re-pick centers): x=" + rat_str(p));
    Patch patch{Patch::Kind::linearize,
                p,
                r,
                profile,
                br.eval_raw(p),
                dfp,
                (int)bi,
                Rat(1),
                Rat(0)};
    Rat M2 = br.sup_abs_second();
    patch.c1_bound = M2 / 2 * r * r + M2 * r * (1 + Rat(3) / (4 * delta));
    c1_upper = rat_max(c1_upper, patch.c1_bound);
    patches.push_back(std::move(patch));
  }

  LinearizeResult res{PatchedMap(f, std::move(patches)),
                      BoxSet::from_boxes(1, v_boxes), Rat(0), c1_upper,
                      std::move(cover)};
  res.ratio = U.measure() > 0 ? res.V.measure() / U.measure() : Rat(1);
  return res;
}

bool check_locally_linear(const PatchedMap& ft, const BoxSet& V) {
  if (V.dim() != 1) throw input_error("check_locally_linear: dim 1 only");
  for (const auto& comp : V.segments()) {
    bool ok = false;
    // inside the flat zone of a linearize patch?
    for (const auto& p : ft.patches()) {
      if (p.kind != Patch::Kind::linearize) continue;
      Rat inner = (1 - p.bump.delta) * p.radius;
      if (p.center - inner <= comp.lo && comp.hi <= p.center + inner) {
        ok = true;
        break;
      }
    }
    if (ok) continue;
    // otherwise the component must sit inside a single affine branch and
    // away from every patch support
    const auto& branches = ft.base().branches();
    for (const auto& br : branches) {
      if (br.lo <= comp.lo && comp.hi <= br.hi && br.affine()) {
        ok = true;
        break;
      }
    }
    if (!ok) return false;
    for (const auto& p : ft.patches()) {
      Rat slo = p.center - p.radius, shi = p.center + p.radius;
      if (!(comp.hi <= slo || shi <= comp.lo)) {
        // overlaps a patch support: affine only if inside the flat zone,
        // which was already checked
        return false;
      }
    }
  }
  return true;
}

}  // namespace acim
