#include "acim/rokhlin.hpp"

#include <algorithm>

#include "acim/errors.hpp"

namespace acim {

namespace {

void cap_check(const BoxSet& s, std::size_t cap, const char* stage) {
  if (s.component_count() > cap)
    throw resource_error(std::string(stage) + ": component cap exceeded (" +
                         std::to_string(s.component_count()) + " > " +
                         std::to_string(cap) + ")");
}

}  // namespace

std::optional<GoodnessRefutation> check_n_good(const CircleMap& f,
                                               const BoxSet& Z, int N) {
  if (!f.exact_mode())
    throw precondition_error("goodness check needs an exact-mode map");
  BoxSet level = Z;
  for (int i = 1; i < N; ++i) {
    level = preimage(f, level);
    if (intersection_measure(Z, level) > 0) {
      BoxSet overlap = intersect(Z, level);
      return GoodnessRefutation{i, overlap.segments().front()};
    }
  }
  return std::nullopt;
}

BoxSet hat_truncated(const CircleMap& f, const BoxSet& Z, int T,
                     std::size_t component_cap) {
  BoxSet H = Z;
  for (int i = 0; i < T; ++i) {
    H = box_union(Z, preimage(f, H));
    cap_check(H, component_cap, "hat_truncated");
  }
  return H;
}

std::optional<Rat> hat_tail_bound(const CircleMap& f, const BoxSet& Z, int T) {
  Rat sigma = f.nonsingularity_constant();
  if (sigma >= 1) return std::nullopt;
  // sum_{i > T} sigma^i * m(Z) = m(Z) sigma^{T+1} / (1 - sigma)
  return Z.measure() * rat_pow(sigma, T + 1) / (1 - sigma);
}

MergeResult merge_good(const CircleMap& f, const GoodSet& A, const GoodSet& B,
                       int T, const RokhlinConfig& cfg) {
  if (A.N != B.N) throw input_error("merge_good: mismatched N");
  const int N = A.N;
  int hatT = cfg.merge_hat_depth > 0 ? cfg.merge_hat_depth : T;
  if (hatT < N - 1) hatT = N - 1;
  if (hatT > T) hatT = std::max(T, N - 1);

  BoxSet hatB = hat_truncated(f, B.Z, hatT, cfg.component_cap);
  BoxSet A1 = subtract(A.Z, hatB);
  BoxSet hatA1 = hat_truncated(f, A1, hatT, cfg.component_cap);
  BoxSet B1 = subtract(B.Z, hatA1);
  BoxSet C = box_union(A1, B1);
  cap_check(C, cfg.component_cap, "merge_good");

  if (auto bad = check_n_good(f, C, N))
    throw std::logic_error("merge_good produced a non-good set at index " +
                           std::to_string(bad->index));

  BoxSet AB = box_union(A.Z, B.Z);
  BoxSet hatC = hat_truncated(f, C, T, cfg.component_cap);
  Rat deficit = AB.measure() - intersection_measure(AB, hatC);
  return MergeResult{GoodSet{std::move(C), N}, deficit};
}

CoverResult cover_good_saturated(const CircleMap& f, int N, const Rat& tol,
                                 const RokhlinConfig& cfg) {
  if (!f.exact_mode() || !f.expanding())
    throw precondition_error("cover needs an expanding piecewise-affine map");
  if (!(tol > 0)) throw input_error("cover tolerance must be positive");

  std::vector<Rat> periodic = find_periodic_points(f, N - 1);
  CoverResult res;

  int q = cfg.cover_resolution;
  if (q == 0) {
    // cells must be short enough that an N-good cell can exist at all
    q = N + 1;
  }
  for (int round = 0; round <= cfg.cover_budget; ++round, ++q) {
    res.pieces.clear();
    res.excluded_points = periodic;
    long cells = 1L << q;
    // exclusion radius: total excluded mass < tol/2
    Rat r_excl = periodic.empty()
                     ? Rat(0)
                     : rat_min(frac(1, 4 * (long)periodic.size()) * tol, frac(1, cells));
    res.exclusion_radius = r_excl;

    std::vector<Box> kept;
    Rat covered(0);
    for (long j = 0; j < cells; ++j) {
      Rat lo(j, cells), hi(j + 1, cells);
      lo.canonicalize();
      hi.canonicalize();
      bool excluded = false;
      for (const auto& p : periodic) {
        // distance on the circle
        Rat d = rat_abs(p - (lo + hi) / 2);
        d = rat_min(d, 1 - d);
        if (d <= r_excl + frac(1, 2 * cells)) {
          excluded = true;
          break;
        }
      }
      if (excluded) continue;
      BoxSet cell = BoxSet::segment(lo, hi);
      if (check_n_good(f, cell, N)) continue;  // refuted
      kept.push_back(Box{Interval{lo, hi}});
      covered += hi - lo;
    }
    if (covered > 1 - tol) {
      std::size_t total = 0;
      for (const auto& b : kept) {
        BoxSet cell = BoxSet::from_boxes(1, {b});
        BoxSet piece = cell;
        for (int i = 0; i < N; ++i) piece = preimage(f, piece);
        cap_check(piece, cfg.component_cap, "cover piece");
        total += piece.component_count();
        if (total > cfg.component_cap)
          throw resource_error("cover: total piece components exceed the cap");
        res.pieces.push_back(GoodSet{std::move(piece), N});
      }
      res.covered = covered;  // preimages preserve nullity, f^-N keeps coverage
      return res;
    }
  }
  throw resource_error("cover: tolerance unreachable within subdivision budget");
}

WResult build_W(const CircleMap& f, int N, const Rat& eps, int T,
                const RokhlinConfig& cfg) {
  // Collect a union-compatible subfamily of the saturated cover pieces:
  // whenever the next piece interacts with nothing collected so far, the
  // merge step degenerates to a plain union (its hat-subtractions remove
  // nothing), which keeps the component count of W proportional to the
  // cover size instead of fragmenting it. Interacting pieces are skipped:
  // their mass is reached by the truncated hat anyway, and the exact
  // depth-T hat measure is the final arbiter.
  GoodSet C{BoxSet::empty(1), N};
  int accepted = 0;
  Rat hat_m(0);
  Rat prev_tol(-1);
  for (int round = 0; round < 3; ++round) {
    Rat tol = rat_max(eps / 2, frac(1, 8) / (1L << round));
    if (tol == prev_tol) break;
    prev_tol = tol;
    CoverResult cover = cover_good_saturated(f, N, tol, cfg);

    BoxSet W = BoxSet::empty(1);
    std::vector<BoxSet> P(N, BoxSet::empty(1));  // P[i] = f^-i(W), i >= 1
    accepted = 0;
    Rat mass(0);
    for (const auto& piece : cover.pieces) {
      if (cfg.w_mass_cap > 0 && mass >= cfg.w_mass_cap) break;
      const BoxSet& B = piece.Z;
      bool compatible = true;
      std::vector<BoxSet> preB(N, BoxSet::empty(1));
      {
        BoxSet cur = B;
        for (int i = 1; i < N && compatible; ++i) {
          cur = preimage(f, cur);
          preB[i] = cur;
          if (intersection_measure(B, preB[i]) > 0) compatible = false;
          if (intersection_measure(W, preB[i]) > 0) compatible = false;
          if (intersection_measure(B, P[i]) > 0) compatible = false;
        }
      }
      if (!compatible) continue;
      W = box_union(W, B);
      for (int i = 1; i < N; ++i) P[i] = box_union(P[i], preB[i]);
      mass += B.measure();
      ++accepted;
      cap_check(W, cfg.component_cap, "build_W union");
    }
    if (accepted == 0)
      throw resource_error("build_W: no compatible cover piece");
    C = GoodSet{W, N};
    if (auto bad = check_n_good(f, C.Z, N))
      throw std::logic_error("build_W produced a non-good union at index " +
                             std::to_string(bad->index));
    hat_m = hat_truncated(f, C.Z, T, cfg.component_cap).measure();
    if (hat_m > 1 - eps) break;
  }
  int merges = accepted > 0 ? accepted - 1 : 0;
  if (!(hat_m > 1 - eps))
    throw resource_error("build_W: truncated hat below target (increase T)");

  // saturation regression: f^-N(f^N(W)) == W mod null
  BoxSet img = C.Z;
  for (int i = 0; i < N; ++i) img = image(f, img);
  BoxSet back = img;
  for (int i = 0; i < N; ++i) back = preimage(f, back);
  bool saturated = (back.measure() == C.Z.measure()) &&
                   (intersection_measure(back, C.Z) == C.Z.measure());

  return WResult{std::move(C), hat_m, merges, saturated};
}

VResult build_V_core(const CircleMap& f, int N, const Rat& hat_eps, int T,
                     const RokhlinConfig& cfg) {
  WResult w = build_W(f, N, hat_eps, T, cfg);

  // W, f(W), ..., f^{N-1}(W) are disjoint; the least index with measure
  // <= 1/N exists by pigeonhole.
  BoxSet img = w.W.Z;
  Rat WM = w.W.Z.measure();
  int idx = -1;
  BoxSet V = img;
  for (int i = 0; i < N; ++i) {
    if (img.measure() <= frac(1, N)) {
      idx = i;
      V = img;
      break;
    }
    img = image(f, img);
  }
  if (idx < 0)
    throw std::logic_error("build_V: pigeonhole failed (images not disjoint?)");

  if (auto bad = check_n_good(f, V, N))
    throw std::logic_error("build_V: image lost goodness at index " +
                           std::to_string(bad->index));

  BoxSet hatV = hat_truncated(f, V, T, cfg.component_cap);
  return VResult{GoodSet{std::move(V), N}, idx, hatV.measure(), WM};
}

VResult build_V(const CircleMap& f, int N, const Rat& eps, int T,
                const RokhlinConfig& cfg) {
  if (!(Rat(N) > 1 / eps))
    throw precondition_error("build_V requires N > 1/eps");
  return build_V_core(f, N, eps, T, cfg);
}

Tower build_tower(const CircleMap& f, int n0, int l, const Rat& eps0, int T,
                  const RokhlinConfig& cfg) {
  if (n0 < 1 || l < 1 || l > n0) throw input_error("need 1 <= l <= n0");
  if (!(eps0 > 0)) throw input_error("eps0 must be positive");
  if (T < n0) throw input_error("truncation depth must be at least n0");
  if (!f.exact_mode() || !f.expanding())
    throw precondition_error("tower needs an expanding piecewise-affine map");
  // aperiodicity certificate: finitely many periodic points of low period
  (void)find_periodic_points(f, n0);

  Tower t;
  t.n0 = n0;
  t.l = l;
  t.eps0 = eps0;
  t.T = T;

  // the absolute-continuity smallness target for m(V): m(Z) < eps_abs
  // forces m(union of the first 2 n0 preimages of Z) < eps0 / 2
  Rat sigma = f.nonsingularity_constant();
  Rat series(0), pw(1);
  for (int i = 0; i < 2 * n0; ++i) {
    series += pw;
    pw *= sigma;
  }
  t.eps_abs = eps0 / (2 * series);

  RokhlinConfig vcfg = cfg;
  if (vcfg.w_mass_cap == 0) vcfg.w_mass_cap = frac(1, 3 * (long)n0);
  VResult vr = build_V_core(f, n0, eps0 / 2, T, vcfg);
  t.V = vr.V.Z;
  t.V_measure = t.V.measure();
  t.V_hat_measure = vr.hat_measure;

  // first-entry decomposition: star(s+1) = f^-1(star(s)) \ V
  t.star_measures.assign(T + 1, Rat(0));
  {
    BoxSet P = t.V;
    t.star_measures[0] = t.V_measure;
    for (int s = 1; s <= T; ++s) {
      P = subtract(preimage(f, P), t.V);
      cap_check(P, cfg.component_cap, "tower star chain");
      t.star_measures[s] = P.measure();
    }
  }

  // residue ledger S_j and the pigeonhole choice
  t.S.assign(n0, Rat(0));
  for (int j = 0; j < n0; ++j) {
    for (int k = j; k < j + l; ++k) {
      int cls = k % n0;
      for (int s = cls; s <= T; s += n0) t.S[j] += t.star_measures[s];
    }
  }
  t.j0 = 0;
  {
    // first residue clearing the pigeonhole bound l/n0; one always exists
    // since sum_j S_j = l * m(hat V_T) <= l
    Rat bound = frac(l, n0);
    bool found = false;
    for (int j = 0; j < n0; ++j)
      if (t.S[j] <= bound) {
        t.j0 = j;
        found = true;
        break;
      }
    if (!found) {
      Rat best = t.S[0];
      for (int j = 1; j < n0; ++j)
        if (t.S[j] < best) {
          best = t.S[j];
          t.j0 = j;
        }
    }
  }

  // second pass: materialize the chosen slices
  {
    BoxSet P = t.V;
    BoxSet U = BoxSet::empty(1);
    for (int s = 1; s <= T; ++s) {
      P = subtract(preimage(f, P), t.V);
      if (s >= n0 && (s - t.j0) % n0 == 0) {
        U = box_union(U, P);
        cap_check(U, cfg.component_cap, "tower U assembly");
      }
    }
    t.U = std::move(U);
  }

  // exact level ledger and disjointness
  t.level_measures.clear();
  t.disjoint_ok = true;
  {
    BoxSet L = t.U;
    t.level_measures.push_back(L.measure());
    for (int i = 1; i < n0; ++i) {
      L = preimage(f, L);
      cap_check(L, cfg.component_cap, "tower level");
      t.level_measures.push_back(L.measure());
      // levels i < j disjoint iff U meets f^-(j-i)(U) in a null set
      if (intersection_measure(t.U, L) > 0) t.disjoint_ok = false;
    }
  }

  t.fill = Rat(0);
  for (const auto& m : t.level_measures) t.fill += m;
  t.fill_ok = t.fill > 1 - eps0;
  t.low_sum = Rat(0);
  for (int i = 0; i < l; ++i) t.low_sum += t.level_measures[i];
  t.low_ok = t.low_sum < frac(l, n0) + eps0;

  // truncated pigeonhole identity: sum_j S_j == l * m(hat V_T)
  Rat sum_S(0);
  for (const auto& s : t.S) sum_S += s;
  Rat hat_sum(0);
  for (const auto& p : t.star_measures) hat_sum += p;
  if (sum_S != Rat(l) * hat_sum)
    throw std::logic_error("tower: residue ledger identity violated");

  return t;
}

Tower open_refinement(const CircleMap& f, const Tower& t, const Rat& slack,
                      const RokhlinConfig& cfg) {
  if (!(slack > 0)) throw input_error("open_refinement needs positive slack");
  if (t.U.is_empty()) throw input_error("open_refinement on empty tower base");

  Rat sigma = f.nonsingularity_constant();
  Rat sig_pow = rat_pow(rat_max(sigma, Rat(1)), t.n0);
  std::size_t comps = t.U.component_count();
  Rat s = slack / (Rat(8) * Rat((long)comps) * Rat(t.n0) * sig_pow);

  for (int attempt = 0; attempt < 48; ++attempt, s /= 3) {
    std::vector<Interval> shrunk;
    shrunk.reserve(comps);
    for (const auto& seg : t.U.segments()) {
      Rat a = seg.lo + s, b = seg.hi - s;
      if (a < b) shrunk.push_back({a, b});
    }
    if (shrunk.empty()) break;
    BoxSet U0 = BoxSet::from_boxes(1, [&] {
      std::vector<Box> bs;
      bs.reserve(shrunk.size());
      for (auto& iv : shrunk) bs.push_back(Box{iv});
      return bs;
    }());

    Tower out = t;
    out.U = U0;
    out.open_variant = true;
    out.level_measures.clear();
    bool gaps_ok = true;
    Rat min_gap_val;
    bool have_gap = false;
    {
      BoxSet L = U0;
      out.level_measures.push_back(L.measure());
      for (int i = 1; i < t.n0; ++i) {
        L = preimage(f, L);
        out.level_measures.push_back(L.measure());
        Rat g;
        if (!min_gap(U0, L, g)) continue;
        if (g == 0) {
          gaps_ok = false;
          break;
        }
        if (!have_gap || g < min_gap_val) {
          min_gap_val = g;
          have_gap = true;
        }
      }
    }
    if (!gaps_ok) continue;

    out.disjoint_ok = true;
    out.min_level_gap = have_gap ? min_gap_val : Rat(1);
    out.fill = Rat(0);
    for (const auto& m : out.level_measures) out.fill += m;
    out.fill_ok = out.fill > 1 - t.eps0 - slack;
    out.low_sum = Rat(0);
    for (int i = 0; i < t.l; ++i) out.low_sum += out.level_measures[i];
    out.low_ok = out.low_sum < frac(t.l, t.n0) + t.eps0 + slack;
    return out;
  }
  throw resource_error("open_refinement: slack too small to separate level closures");
}

nlohmann::json tower_report(const Tower& t) {
  nlohmann::json j;
  j["n0"] = t.n0;
  j["l"] = t.l;
  j["eps0"] = rat_str(t.eps0);
  j["T"] = t.T;
  j["open_variant"] = t.open_variant;
  j["U"] = boxset_to_json(t.U);
  j["U_components"] = t.U.component_count();
  j["V_measure"] = rat_str(t.V_measure);
  j["V_hat_measure"] = rat_str(t.V_hat_measure);
  j["V_hat_measure_dec"] = rat_decimal(t.V_hat_measure);
  j["eps_abs_target"] = rat_str(t.eps_abs);
  j["j0"] = t.j0;
  nlohmann::json S = nlohmann::json::array();
  for (const auto& s : t.S) S.push_back(rat_str(s));
  j["S"] = S;
  nlohmann::json lv = nlohmann::json::array();
  for (std::size_t i = 0; i < t.level_measures.size(); ++i) {
    lv.push_back({{"i", i},
                  {"measure", rat_str(t.level_measures[i])},
                  {"measure_dec", rat_decimal(t.level_measures[i])}});
  }
  j["levels"] = lv;
  j["checks"] = {
      {"levels_interior_disjoint", t.disjoint_ok},
      {"fill", {{"value", rat_str(t.fill)},
                {"value_dec", rat_decimal(t.fill)},
                {"required_gt", rat_str(1 - t.eps0)},
                {"pass", t.fill_ok}}},
      {"low_levels", {{"value", rat_str(t.low_sum)},
                      {"value_dec", rat_decimal(t.low_sum)},
                      {"required_lt", rat_str(frac(t.l, t.n0) + t.eps0)},
                      {"pass", t.low_ok}}}};
  if (t.open_variant) j["min_level_gap"] = rat_str(t.min_level_gap);
  j["all_ok"] = t.all_ok();
  return j;
}

}  // namespace acim
