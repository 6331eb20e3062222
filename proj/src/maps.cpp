#include "acim/maps.hpp"

#include <algorithm>
#include <cmath>

#include "acim/errors.hpp"

namespace acim {

namespace {

Rat floor_rat(const Rat& x) {
  mpz_class q;
  mpz_fdiv_q(q.get_mpz_t(), x.get_num().get_mpz_t(), x.get_den().get_mpz_t());
  return Rat(q);
}

Rat wrap_unit(const Rat& v) { return v - floor_rat(v); }

}  // namespace

// ---------------------------------------------------------------- Bump

Bump::Bump(const Rat& d) : delta(d) {
  if (!(d > 0 && d < 1)) throw input_error("bump delta must be in (0,1)");
}

Rat Bump::value(const Rat& x) const {
  Rat u = rat_abs(x);
  if (u <= 1 - delta) return Rat(1);
  if (u >= 1) return Rat(0);
  Rat v = (u - (1 - delta)) / delta;  // in (0,1)
  return 1 - v * v * (3 - 2 * v);
}

Rat Bump::derivative(const Rat& x) const {
  Rat u = rat_abs(x);
  if (u <= 1 - delta || u >= 1) return Rat(0);
  Rat v = (u - (1 - delta)) / delta;
  Rat d = -6 * v * (1 - v) / delta;  // derivative in u
  return x < 0 ? Rat(-d) : d;
}

double Bump::value_d(double x) const {
  double dd = rat_double(delta);
  double u = std::fabs(x);
  if (u <= 1.0 - dd) return 1.0;
  if (u >= 1.0) return 0.0;
  double v = (u - (1.0 - dd)) / dd;
  return 1.0 - v * v * (3.0 - 2.0 * v);
}

double Bump::derivative_d(double x) const {
  double dd = rat_double(delta);
  double u = std::fabs(x);
  if (u <= 1.0 - dd || u >= 1.0) return 0.0;
  double v = (u - (1.0 - dd)) / dd;
  double d = -6.0 * v * (1.0 - v) / dd;
  return x < 0 ? -d : d;
}

// ---------------------------------------------------------------- Branch

Rat Branch::slope() const {
  if (!affine()) throw precondition_error("branch is not affine");
  return coeffs.size() == 2 ? coeffs[1] : Rat(0);
}

Rat Branch::offset() const {
  if (!affine()) throw precondition_error("branch is not affine");
  return coeffs.empty() ? Rat(0) : coeffs[0];
}

Rat Branch::eval_raw(const Rat& x) const {
  Rat v(0);
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) v = v * x + *it;
  return v;
}

Rat Branch::deriv_raw(const Rat& x) const {
  Rat v(0);
  for (std::size_t k = coeffs.size(); k-- > 1;)
    v = v * x + Rat((long)k) * coeffs[k];
  return v;
}

double Branch::eval_raw_d(double x) const {
  double v = 0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it)
    v = v * x + rat_double(*it);
  return v;
}

double Branch::deriv_raw_d(double x) const {
  double v = 0;
  for (std::size_t k = coeffs.size(); k-- > 1;)
    v = v * x + k * rat_double(coeffs[k]);
  return v;
}

namespace {
// sup of |c0 + c1 x + c2 x^2| over [lo,hi]: endpoints plus interior vertex.
Rat sup_abs_quadratic(const Rat& c0, const Rat& c1, const Rat& c2,
                      const Rat& lo, const Rat& hi) {
  Rat best = rat_max(rat_abs(c0 + c1 * lo + c2 * lo * lo),
                     rat_abs(c0 + c1 * hi + c2 * hi * hi));
  if (c2 != 0) {
    Rat v = -c1 / (2 * c2);
    if (lo < v && v < hi) best = rat_max(best, rat_abs(c0 + c1 * v + c2 * v * v));
  }
  return best;
}
}  // namespace

Rat Branch::sup_abs_deriv() const {
  if (coeffs.size() > 4) throw input_error("branch degree > 3 unsupported");
  Rat c1 = coeffs.size() > 1 ? coeffs[1] : Rat(0);
  Rat c2 = coeffs.size() > 2 ? Rat(2) * coeffs[2] : Rat(0);
  Rat c3 = coeffs.size() > 3 ? Rat(3) * coeffs[3] : Rat(0);
  return sup_abs_quadratic(c1, c2, c3, lo, hi);
}

Rat Branch::sup_abs_second() const {
  if (coeffs.size() > 4) throw input_error("branch degree > 3 unsupported");
  Rat c2 = coeffs.size() > 2 ? Rat(2) * coeffs[2] : Rat(0);
  Rat c3 = coeffs.size() > 3 ? Rat(6) * coeffs[3] : Rat(0);
  // linear in x: endpoints
  return rat_max(rat_abs(c2 + c3 * lo), rat_abs(c2 + c3 * hi));
}

// ---------------------------------------------------------------- CircleMap

CircleMap::CircleMap(std::vector<Branch> branches, bool mod1)
    : branches_(std::move(branches)), mod1_(mod1) {
  if (branches_.empty()) throw input_error("map needs at least one branch");
  std::sort(branches_.begin(), branches_.end(),
            [](const Branch& a, const Branch& b) { return a.lo < b.lo; });
  Rat cursor(0);
  for (const auto& b : branches_) {
    if (b.lo != cursor) throw input_error("branch domains must partition [0,1)");
    if (!(b.hi > b.lo)) throw input_error("empty branch domain");
    if (b.coeffs.empty()) throw input_error("branch needs coefficients");
    cursor = b.hi;
  }
  if (cursor != 1) throw input_error("branch domains must cover [0,1)");
}

CircleMap CircleMap::doubling() {
  return CircleMap({Branch{Rat(0), Rat(1), {Rat(0), Rat(2)}}}, true);
}

CircleMap CircleMap::affine_expanding(long slope) {
  return CircleMap({Branch{Rat(0), Rat(1), {Rat(0), Rat(slope)}}}, true);
}

CircleMap CircleMap::rotation(const Rat& offset) {
  return CircleMap({Branch{Rat(0), Rat(1), {wrap_unit(offset), Rat(1)}}}, true);
}

CircleMap CircleMap::halving() {
  return CircleMap({Branch{Rat(0), Rat(1), {Rat(0), frac(1, 2)}}}, false);
}

bool CircleMap::exact_mode() const {
  for (const auto& b : branches_)
    if (!b.affine()) return false;
  return true;
}

bool CircleMap::expanding() const {
  for (const auto& b : branches_) {
    if (b.affine()) {
      if (rat_abs(b.slope()) <= 1) return false;
    } else {
      // certified: |p'| > 1 everywhere on the domain
      Rat c1 = b.coeffs.size() > 1 ? b.coeffs[1] : Rat(0);
      Rat c2 = b.coeffs.size() > 2 ? Rat(2) * b.coeffs[2] : Rat(0);
      Rat c3 = b.coeffs.size() > 3 ? Rat(3) * b.coeffs[3] : Rat(0);
      // min |p'| >= |p'(x0)| - sup|p''| * (hi-lo) is crude; use endpoint +
      // vertex minimum of p' and require it > 1 (assumes p' > 0 branch).
      Rat m1 = c1 + c2 * b.lo + c3 * b.lo * b.lo;
      Rat m2 = c1 + c2 * b.hi + c3 * b.hi * b.hi;
      Rat mn = rat_min(m1, m2);
      if (c3 != 0) {
        Rat v = -c2 / (2 * c3);
        if (b.lo < v && v < b.hi) mn = rat_min(mn, c1 + c2 * v + c3 * v * v);
      }
      if (mn <= 1) return false;
    }
  }
  return true;
}

Rat CircleMap::nonsingularity_constant() const {
  Rat s(0);
  for (const auto& b : branches_) {
    if (!b.affine()) throw precondition_error("nonsingularity constant needs affine branches");
    if (b.slope() == 0) throw input_error("zero-slope branch");
    long windows = 1;
    if (mod1_) {
      // number of unit translates the branch's half-open value range meets
      Rat v1 = b.slope() * b.lo + b.offset();
      Rat v2 = b.slope() * b.hi + b.offset();
      Rat vmin = rat_min(v1, v2), vmax = rat_max(v1, v2);
      windows = rat_floor_long(vmax) - rat_floor_long(vmin) + 1;
      if (vmax == Rat(rat_floor_long(vmax)) && windows > 1) --windows;
    }
    s += Rat(windows) / rat_abs(b.slope());
  }
  return s;
}

std::size_t CircleMap::branch_index(const Rat& x) const {
  if (!mod1_ && x == branches_.back().hi) return branches_.size() - 1;
  if (x < 0 || x >= 1)
    throw input_error("map evaluation outside [0,1)");
  std::size_t lo = 0, hi = branches_.size() - 1;
  while (lo < hi) {
    std::size_t mid = (lo + hi + 1) / 2;
    if (branches_[mid].lo <= x)
      lo = mid;
    else
      hi = mid - 1;
  }
  return lo;
}

Rat CircleMap::evaluate(const Rat& x) const {
  const Branch& b = branches_[branch_index(x)];
  Rat v = b.eval_raw(x);
  return mod1_ ? wrap_unit(v) : v;
}

Rat CircleMap::derivative(const Rat& x) const {
  std::size_t i = branch_index(x);
  const Branch& b = branches_[i];
  if (x == b.lo) {
    // break point: compare with the branch to the left (wrapping for mod-1)
    const Branch& l = (i == 0) ? branches_.back() : branches_[i - 1];
    bool left_exists = (i > 0) || mod1_;
    if (left_exists) {
      Rat xl = l.hi;  // left limit point
      bool value_ok = mod1_ ? wrap_unit(l.eval_raw(xl)) == wrap_unit(b.eval_raw(x))
                            : l.eval_raw(xl) == b.eval_raw(x);
      bool deriv_ok = l.deriv_raw(xl) == b.deriv_raw(x);
      if (!value_ok || !deriv_ok)
        throw precondition_error("derivative queried at a break point: x=" + rat_str(x));
    }
  }
  return b.deriv_raw(x);
}

double CircleMap::evaluate_d(double x) const {
  x -= std::floor(x);
  // locate branch by binary search on double endpoints
  std::size_t lo = 0, hi = branches_.size() - 1;
  while (lo < hi) {
    std::size_t mid = (lo + hi + 1) / 2;
    if (rat_double(branches_[mid].lo) <= x)
      lo = mid;
    else
      hi = mid - 1;
  }
  double v = branches_[lo].eval_raw_d(x);
  if (mod1_) v -= std::floor(v);
  return v;
}

double CircleMap::derivative_d(double x) const {
  x -= std::floor(x);
  std::size_t lo = 0, hi = branches_.size() - 1;
  while (lo < hi) {
    std::size_t mid = (lo + hi + 1) / 2;
    if (rat_double(branches_[mid].lo) <= x)
      lo = mid;
    else
      hi = mid - 1;
  }
  return branches_[lo].deriv_raw_d(x);
}

nlohmann::json CircleMap::to_json() const {
  nlohmann::json j;
  j["type"] = exact_mode() ? "piecewise_affine_circle" : "piecewise_poly_circle";
  j["mod1"] = mod1_;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& b : branches_) {
    nlohmann::json jb;
    jb["dom"] = {rat_str(b.lo), rat_str(b.hi)};
    if (b.affine()) {
      jb["slope"] = rat_str(b.slope());
      jb["offset"] = rat_str(b.offset());
    } else {
      nlohmann::json cs = nlohmann::json::array();
      for (const auto& c : b.coeffs) cs.push_back(rat_str(c));
      jb["coeffs"] = cs;
    }
    arr.push_back(jb);
  }
  j["branches"] = arr;
  return j;
}

CircleMap CircleMap::from_json(const nlohmann::json& j) {
  std::string type = j.at("type").get<std::string>();
  if (type != "piecewise_affine_circle" && type != "piecewise_poly_circle")
    throw input_error("unknown map type: " + type);
  bool m1 = j.value("mod1", true);
  std::vector<Branch> bs;
  for (const auto& jb : j.at("branches")) {
    Branch b;
    b.lo = parse_rat(jb.at("dom").at(0).get<std::string>());
    b.hi = parse_rat(jb.at("dom").at(1).get<std::string>());
    if (jb.contains("coeffs")) {
      for (const auto& c : jb.at("coeffs")) b.coeffs.push_back(parse_rat(c.get<std::string>()));
    } else {
      b.coeffs = {parse_rat(jb.at("offset").get<std::string>()),
                  parse_rat(jb.at("slope").get<std::string>())};
    }
    bs.push_back(std::move(b));
  }
  return CircleMap(std::move(bs), m1);
}

// ------------------------------------------------------------- preimage

namespace {

void check_exact_preimage(const CircleMap& f, const BoxSet& s) {
  if (s.dim() != 1) throw input_error("preimage needs a dim-1 set");
  if (f.exact_mode()) return;
  throw precondition_error(
      "exact preimage unavailable: map has smooth pieces (use the enclosure oracle)");
}

}  // namespace

BoxSet preimage(const CircleMap& f, const BoxSet& s) {
  check_exact_preimage(f, s);
  std::vector<Interval> out;
  out.reserve(2 * s.component_count());
  for (const auto& b : f.branches()) {
    Rat a = b.slope();
    if (a == 0) throw input_error("zero-slope branch has no preimage map");
    Rat c = b.offset();
    Rat vlo = a * b.lo + c, vhi = a * b.hi + c;
    Rat vmin = rat_min(vlo, vhi), vmax = rat_max(vlo, vhi);
    for (const auto& seg : s.segments()) {
      // solve a x + c = y + w for y in [seg.lo, seg.hi], x in branch domain
      long wlo = 0, whi = 0;
      if (f.mod1()) {
        wlo = rat_floor_long(vmin - seg.hi) ;
        // ceil(vmin - seg.hi): floor gives <=; adjust
        if (Rat(wlo) < vmin - seg.hi) ++wlo;
        whi = rat_floor_long(vmax - seg.lo);
      }
      for (long w = wlo; w <= whi; ++w) {
        Rat ylo = seg.lo + w, yhi = seg.hi + w;
        Rat xlo, xhi;
        if (a > 0) {
          xlo = (ylo - c) / a;
          xhi = (yhi - c) / a;
        } else {
          xlo = (yhi - c) / a;
          xhi = (ylo - c) / a;
        }
        xlo = rat_max(xlo, b.lo);
        xhi = rat_min(xhi, b.hi);
        if (xlo < xhi) out.push_back({xlo, xhi});
      }
    }
  }
  std::vector<Box> boxes;
  boxes.reserve(out.size());
  for (auto& iv : out) boxes.push_back(Box{std::move(iv)});
  return BoxSet::from_boxes(1, boxes);
}

namespace {

// append [p,q] reduced mod 1 (p <= q, arbitrary reals)
void append_mod1(std::vector<Interval>& out, const Rat& p, const Rat& q) {
  if (q - p >= 1) {
    out.push_back({Rat(0), Rat(1)});
    return;
  }
  Rat w = floor_rat(p);
  Rat p1 = p - w, q1 = q - w;
  if (q1 <= 1) {
    if (p1 < q1) out.push_back({p1, q1});
  } else {
    out.push_back({p1, Rat(1)});
    if (q1 - 1 > 0) out.push_back({Rat(0), q1 - 1});
  }
}

}  // namespace

BoxSet image(const CircleMap& f, const BoxSet& s) {
  if (s.dim() != 1) throw input_error("image needs a dim-1 set");
  if (!f.exact_mode())
    throw precondition_error("exact image unavailable: map has smooth pieces");
  std::vector<Interval> out;
  for (const auto& seg : s.segments()) {
    for (const auto& b : f.branches()) {
      Rat u = rat_max(seg.lo, b.lo);
      Rat v = rat_min(seg.hi, b.hi);
      if (u >= v) continue;
      Rat p = b.slope() * u + b.offset();
      Rat q = b.slope() * v + b.offset();
      if (p > q) std::swap(p, q);
      if (f.mod1())
        append_mod1(out, p, q);
      else
        out.push_back({p, q});
    }
  }
  std::vector<Box> boxes;
  boxes.reserve(out.size());
  for (auto& iv : out) boxes.push_back(Box{std::move(iv)});
  return BoxSet::from_boxes(1, boxes);
}

// ---------------------------------------------------- periodic points

std::vector<Rat> find_periodic_points(const CircleMap& f, int period_max,
                                      std::size_t piece_budget) {
  if (!f.exact_mode())
    throw precondition_error("periodic point solver needs affine branches");
  struct Piece {
    Rat lo, hi;  // subinterval of [0,1)
    Rat A, B;    // composed (unwrapped) affine map on it
  };
  std::vector<Piece> pieces{{Rat(0), Rat(1), Rat(1), Rat(0)}};
  std::vector<Rat> found;

  for (int depth = 1; depth <= period_max; ++depth) {
    std::vector<Piece> next;
    for (const auto& pc : pieces) {
      // value range of the current composite on [lo,hi]
      Rat v1 = pc.A * pc.lo + pc.B, v2 = pc.A * pc.hi + pc.B;
      Rat vmin = rat_min(v1, v2), vmax = rat_max(v1, v2);
      long wlo = 0, whi = 0;
      if (f.mod1()) {
        wlo = rat_floor_long(vmin);
        whi = rat_floor_long(vmax);
        if (Rat(whi) == vmax && vmax > vmin) --whi;  // right edge belongs left
      }
      for (long w = wlo; w <= whi; ++w) {
        for (const auto& br : f.branches()) {
          // x-range where A x + B - w lands in [br.lo, br.hi]
          Rat tlo = br.lo + w, thi = br.hi + w;
          Rat xlo, xhi;
          if (pc.A > 0) {
            xlo = (tlo - pc.B) / pc.A;
            xhi = (thi - pc.B) / pc.A;
          } else if (pc.A < 0) {
            xlo = (thi - pc.B) / pc.A;
            xhi = (tlo - pc.B) / pc.A;
          } else {
            // constant composite: branch selected by the constant value
            if (pc.B - w < br.lo || pc.B - w >= br.hi) continue;
            xlo = pc.lo;
            xhi = pc.hi;
          }
          xlo = rat_max(xlo, pc.lo);
          xhi = rat_min(xhi, pc.hi);
          if (xlo >= xhi) continue;
          Rat a = br.slope();
          Piece np{xlo, xhi, a * pc.A, a * (pc.B - w) + br.offset()};
          next.push_back(std::move(np));
        }
      }
      if (next.size() > piece_budget)
        throw resource_error("periodic point solver piece budget exceeded");
    }
    pieces.swap(next);

    // fixed points of the depth-composite, modulo 1
    for (const auto& pc : pieces) {
      Rat Am1 = pc.A - 1;
      if (Am1 == 0) {
        if (f.mod1() ? (pc.B == floor_rat(pc.B)) : (pc.B == 0))
          throw input_error("identity piece: continuum of periodic points");
        continue;
      }
      Rat y1 = Am1 * pc.lo + pc.B, y2 = Am1 * pc.hi + pc.B;
      Rat ymin = rat_min(y1, y2), ymax = rat_max(y1, y2);
      long mlo = rat_floor_long(ymin);
      if (Rat(mlo) < ymin) ++mlo;
      long mhi = rat_floor_long(ymax);
      if (!f.mod1()) {
        mlo = std::max(mlo, 0L);
        mhi = std::min(mhi, 0L);
      }
      for (long m = mlo; m <= mhi; ++m) {
        Rat x = (Rat(m) - pc.B) / Am1;
        if (pc.lo <= x && x < pc.hi) found.push_back(x);
      }
    }
  }
  std::sort(found.begin(), found.end());
  found.erase(std::unique(found.begin(), found.end()), found.end());
  return found;
}

// ---------------------------------------------------------------- Patch

Rat Patch::h_value(const Rat& x) const {
  Rat t = x - center;
  if (rat_abs(t) >= radius) return x;
  return center + t * (1 - (1 - kappa) * bump.value(t / radius));
}

Rat Patch::h_deriv(const Rat& x) const {
  Rat t = x - center;
  if (rat_abs(t) >= radius) return Rat(1);
  Rat u = t / radius;
  return 1 - (1 - kappa) * (bump.value(u) + u * bump.derivative(u));
}

// ------------------------------------------------------------ PatchedMap

PatchedMap::PatchedMap(CircleMap base, std::vector<Patch> patches)
    : base_(std::move(base)), patches_(std::move(patches)) {
  std::sort(patches_.begin(), patches_.end(),
            [](const Patch& a, const Patch& b) { return a.center < b.center; });
  for (std::size_t i = 0; i < patches_.size(); ++i) {
    const Patch& p = patches_[i];
    if (p.radius <= 0) throw input_error("patch with nonpositive radius");
    if (i > 0) {
      const Patch& q = patches_[i - 1];
      if (q.center + q.radius > p.center - p.radius)
        throw input_error("patch supports overlap");
    }
  }
  patch_centers_d_.reserve(patches_.size());
  for (const auto& p : patches_) patch_centers_d_.push_back(rat_double(p.center));
}

const Patch* PatchedMap::find_patch(const Rat& x) const {
  if (patches_.empty()) return nullptr;
  std::size_t lo = 0, hi = patches_.size() - 1;
  while (lo < hi) {
    std::size_t mid = (lo + hi + 1) / 2;
    if (patches_[mid].center - patches_[mid].radius <= x)
      lo = mid;
    else
      hi = mid - 1;
  }
  const Patch& p = patches_[lo];
  if (p.center - p.radius <= x && x <= p.center + p.radius) return &p;
  if (lo > 0) {
    const Patch& q = patches_[lo - 1];
    if (q.center - q.radius <= x && x <= q.center + q.radius) return &q;
  }
  return nullptr;
}

const Patch* PatchedMap::find_patch_d(double x) const {
  if (patches_.empty()) return nullptr;
  auto it = std::upper_bound(patch_centers_d_.begin(), patch_centers_d_.end(), x);
  for (int k = 0; k < 2; ++k) {
    if (it == patch_centers_d_.begin()) break;
    --it;
    const Patch& p = patches_[it - patch_centers_d_.begin()];
    double c = rat_double(p.center), r = rat_double(p.radius);
    if (c - r <= x && x <= c + r) return &p;
  }
  auto jt = std::upper_bound(patch_centers_d_.begin(), patch_centers_d_.end(), x);
  if (jt != patch_centers_d_.end()) {
    const Patch& p = patches_[jt - patch_centers_d_.begin()];
    double c = rat_double(p.center), r = rat_double(p.radius);
    if (c - r <= x && x <= c + r) return &p;
  }
  return nullptr;
}

Rat PatchedMap::evaluate(const Rat& x) const {
  const Patch* p = find_patch(x);
  if (!p) return base_.evaluate(x);
  if (p->kind == Patch::Kind::compress) return base_.evaluate(p->h_value(x));
  const Branch& br = base_.branches()[p->branch];
  Rat fx = br.eval_raw(x);
  Rat rho = p->bump.value((x - p->center) / p->radius);
  Rat aff = p->fc + p->dfc * (x - p->center);
  Rat v = fx + rho * (aff - fx);
  return base_.mod1() ? wrap_unit(v) : v;
}

Rat PatchedMap::derivative(const Rat& x) const {
  const Patch* p = find_patch(x);
  if (!p) return base_.derivative(x);
  if (p->kind == Patch::Kind::compress)
    return base_.derivative(p->h_value(x)) * p->h_deriv(x);
  const Branch& br = base_.branches()[p->branch];
  Rat fx = br.eval_raw(x);
  Rat dfx = br.deriv_raw(x);
  Rat u = (x - p->center) / p->radius;
  Rat rho = p->bump.value(u);
  Rat drho = p->bump.derivative(u) / p->radius;
  Rat aff = p->fc + p->dfc * (x - p->center);
  return dfx + drho * (aff - fx) + rho * (p->dfc - dfx);
}

double PatchedMap::evaluate_d(double x) const {
  const Patch* p = find_patch_d(x);
  if (!p) return base_.evaluate_d(x);
  double c = rat_double(p->center), r = rat_double(p->radius);
  if (p->kind == Patch::Kind::compress) {
    double t = x - c;
    double h = c + t * (1.0 - (1.0 - rat_double(p->kappa)) * p->bump.value_d(t / r));
    return base_.evaluate_d(h);
  }
  double fx = base_.branches()[p->branch].eval_raw_d(x);
  double rho = p->bump.value_d((x - c) / r);
  double aff = rat_double(p->fc) + rat_double(p->dfc) * (x - c);
  double v = fx + rho * (aff - fx);
  if (base_.mod1()) v -= std::floor(v);
  return v;
}

double PatchedMap::derivative_d(double x) const {
  const Patch* p = find_patch_d(x);
  if (!p) return base_.derivative_d(x);
  double c = rat_double(p->center), r = rat_double(p->radius);
  if (p->kind == Patch::Kind::compress) {
    double t = x - c;
    double u = t / r;
    double kap = rat_double(p->kappa);
    double h = c + t * (1.0 - (1.0 - kap) * p->bump.value_d(u));
    double hd = 1.0 - (1.0 - kap) * (p->bump.value_d(u) + u * p->bump.derivative_d(u));
    return base_.derivative_d(h) * hd;
  }
  const Branch& br = base_.branches()[p->branch];
  double fx = br.eval_raw_d(x);
  double dfx = br.deriv_raw_d(x);
  double u = (x - c) / r;
  double rho = p->bump.value_d(u);
  double drho = p->bump.derivative_d(u) / r;
  double aff = rat_double(p->fc) + rat_double(p->dfc) * (x - c);
  return dfx + drho * (aff - fx) + rho * (rat_double(p->dfc) - dfx);
}

BoxSet PatchedMap::image(const BoxSet& s) const {
  if (s.dim() != 1) throw input_error("image needs a dim-1 set");
  if (!base_.exact_mode())
    throw precondition_error("exact image needs an affine-branch base map");

  // split points: branch boundaries and patch support boundaries
  std::vector<Rat> cuts;
  for (const auto& b : base_.branches()) cuts.push_back(b.lo);
  for (const auto& p : patches_) {
    cuts.push_back(p.center - p.radius);
    cuts.push_back(p.center + p.radius);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::vector<Interval> out;
  for (const auto& seg : s.segments()) {
    // monotone pieces of the patched map inside seg
    std::vector<Rat> pts{seg.lo};
    auto it = std::upper_bound(cuts.begin(), cuts.end(), seg.lo);
    for (; it != cuts.end() && *it < seg.hi; ++it) pts.push_back(*it);
    pts.push_back(seg.hi);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const Rat& u = pts[i];
      const Rat& v = pts[i + 1];
      const Patch* p = find_patch((u + v) / 2);
      Rat pu, pv;
      if (p && p->kind == Patch::Kind::compress) {
        // h is strictly increasing (h' >= kappa > 0): endpoint images
        if (!(p->kappa > 0)) throw precondition_error("compressor with kappa <= 0");
        pu = p->h_value(u);
        pv = p->h_value(v);
      } else if (p) {
        throw precondition_error("exact image through a blended linearization patch");
      } else {
        pu = u;
        pv = v;
      }
      // h is increasing, so pu < pv and the image segment stays inside the
      // branch the piece was cut into
      const Branch& br = base_.branches()[base_.branch_index((pu + pv) / 2)];
      Rat a = br.slope(), c = br.offset();
      Rat q1 = a * pu + c, q2 = a * pv + c;
      if (q1 > q2) std::swap(q1, q2);
      if (base_.mod1())
        append_mod1(out, q1, q2);
      else
        out.push_back({q1, q2});
    }
  }
  std::vector<Box> boxes;
  boxes.reserve(out.size());
  for (auto& iv : out) boxes.push_back(Box{std::move(iv)});
  return BoxSet::from_boxes(1, boxes);
}

BoxSet PatchedMap::image_iterate(const BoxSet& s, int n) const {
  BoxSet cur = s;
  for (int i = 0; i < n; ++i) cur = image(cur);
  return cur;
}

Rat PatchedMap::c1_bound_to_base() const {
  Rat best(0);
  for (const auto& p : patches_) best = rat_max(best, p.c1_bound);
  return best;
}

nlohmann::json PatchedMap::to_json() const {
  nlohmann::json j;
  j["base"] = base_.to_json();
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : patches_) {
    nlohmann::json jp;
    jp["kind"] = p.kind == Patch::Kind::compress ? "compress" : "linearize";
    jp["center"] = rat_str(p.center);
    jp["radius"] = rat_str(p.radius);
    jp["bump_delta"] = rat_str(p.bump.delta);
    jp["c1_bound"] = rat_str(p.c1_bound);
    if (p.kind == Patch::Kind::compress) {
      jp["kappa"] = rat_str(p.kappa);
    } else {
      jp["fc"] = rat_str(p.fc);
      jp["dfc"] = rat_str(p.dfc);
      jp["branch"] = p.branch;
    }
    arr.push_back(jp);
  }
  j["patches"] = arr;
  return j;
}

PatchedMap PatchedMap::from_json(const nlohmann::json& j) {
  CircleMap base = CircleMap::from_json(j.at("base"));
  std::vector<Patch> ps;
  for (const auto& jp : j.at("patches")) {
    std::string kind = jp.at("kind").get<std::string>();
    Patch p{kind == "compress" ? Patch::Kind::compress : Patch::Kind::linearize,
            parse_rat(jp.at("center").get<std::string>()),
            parse_rat(jp.at("radius").get<std::string>()),
            Bump(parse_rat(jp.at("bump_delta").get<std::string>())),
            Rat(0),
            Rat(0),
            -1,
            Rat(1),
            parse_rat(jp.at("c1_bound").get<std::string>())};
    if (p.kind == Patch::Kind::compress) {
      p.kappa = parse_rat(jp.at("kappa").get<std::string>());
    } else {
      p.fc = parse_rat(jp.at("fc").get<std::string>());
      p.dfc = parse_rat(jp.at("dfc").get<std::string>());
      p.branch = jp.at("branch").get<int>();
    }
    ps.push_back(std::move(p));
  }
  return PatchedMap(std::move(base), std::move(ps));
}

// ----------------------------------------------------- C1 distances

Rat c1_distance_lower(const PatchedMap& f, const PatchedMap& g, int grid_n) {
  Rat best(0);
  for (int k = 0; k < grid_n; ++k) {
    Rat x(2 * k + 1, 2 * grid_n);
    x.canonicalize();
    try {
      Rat dv = rat_abs(f.evaluate(x) - g.evaluate(x));
      Rat dd = rat_abs(f.derivative(x) - g.derivative(x));
      best = rat_max(best, dv + dd);
    } catch (const precondition_error&) {
      // break point on the grid: skip
    }
  }
  return best;
}

namespace {

bool same_branches(const CircleMap& a, const CircleMap& b) {
  if (a.branches().size() != b.branches().size()) return false;
  for (std::size_t i = 0; i < a.branches().size(); ++i) {
    if (a.branches()[i].lo != b.branches()[i].lo) return false;
    if (a.branches()[i].hi != b.branches()[i].hi) return false;
  }
  return a.mod1() == b.mod1();
}

bool identical_map(const CircleMap& a, const CircleMap& b) {
  if (!same_branches(a, b)) return false;
  for (std::size_t i = 0; i < a.branches().size(); ++i)
    if (a.branches()[i].coeffs != b.branches()[i].coeffs) return false;
  return true;
}

// sound sup bound of |p| + |p'| for the coefficient-difference polynomial
Rat poly_c1_sup_bound(const std::vector<Rat>& ca, const std::vector<Rat>& cb,
                      const Rat& lo, const Rat& hi) {
  std::size_t n = std::max(ca.size(), cb.size());
  Rat xmax = rat_max(rat_abs(lo), rat_abs(hi));
  Rat v(0), d(0), xp(1);
  for (std::size_t k = 0; k < n; ++k) {
    Rat dc = (k < ca.size() ? ca[k] : Rat(0)) - (k < cb.size() ? cb[k] : Rat(0));
    v += rat_abs(dc) * xp;
    if (k >= 1) d += Rat((long)k) * rat_abs(dc) * (k == 1 ? Rat(1) : rat_pow(xmax, (long)k - 1));
    xp *= xmax;
  }
  return v + d;
}

bool patches_equal(const Patch& p, const Patch& q) {
  return p.kind == q.kind && p.center == q.center && p.radius == q.radius &&
         p.bump.delta == q.bump.delta && p.kappa == q.kappa && p.fc == q.fc &&
         p.dfc == q.dfc;
}

}  // namespace

Rat c1_distance_bound(const PatchedMap& f, const PatchedMap& g) {
  Rat base_part(0);
  if (!identical_map(f.base(), g.base())) {
    if (!same_branches(f.base(), g.base()))
      throw input_error("c1_distance_bound: maps have incomparable branch structure");
    for (std::size_t i = 0; i < f.base().branches().size(); ++i) {
      const Branch& a = f.base().branches()[i];
      const Branch& b = g.base().branches()[i];
      base_part = rat_max(base_part, poly_c1_sup_bound(a.coeffs, b.coeffs, a.lo, a.hi));
    }
  }
  // patches present in exactly one of the maps contribute their own bound;
  // overlapping supports from both maps stack.
  Rat patch_part(0);
  auto one_sided = [&](const PatchedMap& x, const PatchedMap& y) {
    for (const auto& p : x.patches()) {
      bool shared = false;
      for (const auto& q : y.patches())
        if (patches_equal(p, q)) {
          shared = true;
          break;
        }
      if (shared) continue;
      Rat contrib = p.c1_bound;
      for (const auto& q : y.patches()) {
        bool overlap = !(q.center + q.radius <= p.center - p.radius ||
                         p.center + p.radius <= q.center - q.radius);
        if (overlap && !patches_equal(p, q)) contrib += q.c1_bound;
      }
      patch_part = rat_max(patch_part, contrib);
    }
  };
  one_sided(f, g);
  one_sided(g, f);
  return base_part + patch_part;
}

}  // namespace acim
