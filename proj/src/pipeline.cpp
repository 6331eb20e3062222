#include "acim/pipeline.hpp"

#include <algorithm>
#include <map>

#include "acim/errors.hpp"
#include "acim/linearize.hpp"
#include "acim/slicing.hpp"

namespace acim {

namespace {

// smallest k and a kappa fitting both kappa^k < delta/(1-delta) and the
// C1 budget (1-kappa)(1 + 2/(delta/2)) <= budget
void pick_kappa_k(const Rat& delta, const Rat& budget, int k_override,
                  Rat& kappa_out, int& k_out) {
  Rat ratio = delta / (1 - delta);
  Rat shoulder = 1 + 4 / delta;  // bump parameter delta/2
  Rat kappa_min = 1 - budget / shoulder;
  if (kappa_min <= 0) {
    // budget unconstrained: any kappa; keep the compression comfortable
    kappa_out = rat_min(frac(1, 2), ratio / 2);
    if (!(kappa_out > 0)) kappa_out = ratio / 2;
    k_out = k_override > 0 ? k_override : compute_k(kappa_out, delta);
    return;
  }
  if (!(kappa_min < 1))
    throw precondition_error("c1 budget too small for any compressor");
  Rat kappa = kappa_min + (1 - kappa_min) / 64;
  int k = compute_k(kappa, delta);
  if (k_override > 0) {
    if (k_override < k)
      throw precondition_error("k_override below what the c1 budget admits");
    k = k_override;
  }
  kappa_out = kappa;
  k_out = k;
}

}  // namespace

TowerLinearization pipeline_step1(const CircleMap& f, const Rat& eps,
                                  const PipelineConfig& cfg) {
  if (!(eps > 0 && eps < 1)) throw input_error("eps must be in (0,1)");
  if (!f.exact_mode() || !f.expanding())
    throw precondition_error(
        "pipeline needs an expanding piecewise-affine map (smooth inputs go "
        "through the linearization demos first)");
  // aperiodicity / critical-set certificate
  (void)find_periodic_points(f, std::min(8, std::max(2, (int)(1 / rat_double(eps)))));

  TowerLinearization tl;
  tl.eps = eps;
  tl.delta = cfg.delta > 0 ? cfg.delta : 3 * eps / 4;
  if (!(tl.delta < eps) || !(1 - tl.delta > 1 - eps))
    throw input_error("delta must satisfy delta < eps");

  pick_kappa_k(tl.delta, cfg.c1_budget, cfg.k_override, tl.kappa, tl.k);
  // what the source construction's same-eps budget would demand (reported)
  tl.k_paper = compute_k(compute_kappa(eps, tl.delta), tl.delta);

  // smallest n with k/(n+1) < eps
  long n_plus_1 = rat_floor_long(Rat(tl.k) / eps) + 1;
  tl.n = (int)n_plus_1 - 1;
  if (tl.n < tl.k) tl.n = tl.k;  // the slicing needs n >= k

  int n0 = tl.n + 1;
  int T = cfg.T > 0 ? cfg.T : 2 * n0;
  RokhlinConfig rcfg = cfg.rokhlin;
  rcfg.component_cap = cfg.component_cap;
  tl.tower = build_tower(f, n0, tl.k, eps / 2, T, rcfg);
  try {
    Rat slack = cfg.open_slack > 0 ? cfg.open_slack : eps / 16;
    tl.tower = open_refinement(f, tl.tower, slack, rcfg);
    tl.open_ok = true;
  } catch (const resource_error&) {
    tl.open_ok = false;  // continue with the closed tower, reported
  }

  // Q_i = f^-i(U): piecewise-affine maps are locally linear on every open
  // set, so the identity linearization is exact and Q keeps full measure
  tl.Q.clear();
  tl.Q.push_back(tl.tower.U);
  for (int i = 1; i <= tl.n; ++i) {
    BoxSet L = preimage(f, tl.Q.back());
    if (L.component_count() > cfg.component_cap)
      throw resource_error("pipeline: Q level exceeds the component cap");
    tl.Q.push_back(std::move(L));
  }
  tl.Q_measures.clear();
  for (const auto& q : tl.Q) tl.Q_measures.push_back(q.measure());
  tl.low_sum = Rat(0);
  for (int i = 0; i < tl.k; ++i) tl.low_sum += tl.Q_measures[i];
  tl.fill_sum = Rat(0);
  for (const auto& m : tl.Q_measures) tl.fill_sum += m;
  tl.rok3_low_ok = tl.low_sum < eps;
  tl.rok3_fill_ok = tl.fill_sum > 1 - eps;
  tl.c1_f_to_ftilde = Rat(0);
  return tl;
}

void pipeline_step2(const CircleMap& f, const Rat& eps,
                    const PipelineConfig& cfg, TowerLinearization& tl,
                    BranchTree& bt, PatchedMap& g_out) {
  bt.tau = cfg.tau > 0 ? cfg.tau : tl.delta / 4;
  if (!(bt.tau > 0 && bt.tau < 1)) throw input_error("tau must be in (0,1)");
  bt.boxes.assign(tl.n + 1, {});

  const BoxSet& Q0 = tl.Q[0];
  if (Q0.is_empty()) {
    // degenerate: nothing to perturb
    bt.vitali_deficit = Rat(0);
    bt.vitali_ok = true;
    bt.shrink_ok = true;
    bt.worst_shrink_margin = Rat(0);
    g_out = PatchedMap(f);
    return;
  }

  // Vitali packing of Q_0 by the U-boxes (any aspect works in d = 1; the
  // packing has to reach the eps m(Q_0) deficit)
  {
    Rat maxlen(0);
    for (const auto& s : Q0.segments()) maxlen = rat_max(maxlen, s.hi - s.lo);
    Rat gamma_v = rat_min(2 * eps, frac(63, 64));
    VitaliCover cover = vitali_cover(Q0, gamma_v, maxlen / 2 + maxlen / 16);
    for (const auto& ball : cover.balls)
      bt.boxes[0].push_back(BranchBox{0, (ball.lo + ball.hi) / 2,
                                      (ball.hi - ball.lo) / 2});
  }
  {
    std::vector<Box> u0;
    for (const auto& b : bt.boxes[0])
      u0.push_back(Box{Interval{b.center - b.radius, b.center + b.radius}});
    BoxSet u0set = BoxSet::from_boxes(1, u0);
    bt.vitali_deficit = Q0.measure() - intersection_measure(Q0, u0set);
    bt.vitali_ok = bt.vitali_deficit <= eps * Q0.measure();
  }

  // branch preimages: level i+1 boxes are the components of f^-1(level-i
  // boxes) that stay inside Q_{i+1}
  for (int i = 0; i < tl.n; ++i) {
    const auto& src = bt.boxes[i];
    auto& dst = bt.boxes[i + 1];
    const auto& Qnext = tl.Q[i + 1].segments();
    for (const auto& b : src) {
      BoxSet pre = preimage(
          f, BoxSet::segment(b.center - b.radius, b.center + b.radius));
      for (const auto& comp : pre.segments()) {
        // containment in Q_{i+1}: binary search for the covering segment
        std::size_t lo = 0, hi = Qnext.size();
        while (lo < hi) {
          std::size_t mid = (lo + hi) / 2;
          if (Qnext[mid].hi < comp.lo)
            lo = mid + 1;
          else
            hi = mid;
        }
        if (lo < Qnext.size() && Qnext[lo].lo <= comp.lo && comp.hi <= Qnext[lo].hi)
          dst.push_back(BranchBox{i + 1, (comp.lo + comp.hi) / 2,
                                  (comp.hi - comp.lo) / 2});
      }
    }
    std::size_t total = 0;
    for (const auto& lv : bt.boxes) total += lv.size();
    if (total > cfg.component_cap)
      throw resource_error("pipeline: branch box count exceeds the component cap");
  }

  // one compressor patch per distinct box
  Rat bump_delta = tl.delta / 2;
  Bump profile(bump_delta);
  std::vector<Patch> patches;
  for (const auto& lv : bt.boxes)
    for (const auto& b : lv) {
      Patch p{Patch::Kind::compress, b.center, b.radius, profile,
              Rat(0),  Rat(0), -1, tl.kappa, Rat(0)};
      p.c1_bound = (1 - tl.kappa) * (b.radius + 1 + 3 / (2 * bump_delta));
      patches.push_back(std::move(p));
    }
  g_out = PatchedMap(f, std::move(patches));

  // exact shrink verification along every branch chain: the k-step image of
  // the V-box must land inside the W-box k levels down
  bt.shrink_ok = true;
  bt.chains_checked = 0;
  bool have_margin = false;
  for (int i = tl.k; i <= tl.n; ++i) {
    for (const auto& b : bt.boxes[i]) {
      BoxSet v = BoxSet::segment(b.center - (1 - tl.delta) * b.radius,
                                 b.center + (1 - tl.delta) * b.radius);
      BoxSet img = g_out.image_iterate(v, tl.k);
      ++bt.chains_checked;
      // locate the W-box: k-fold forward branch image of the box center
      Rat c = b.center;
      Rat w_radius = b.radius;
      for (int t = 0; t < tl.k; ++t) {
        std::size_t bi = f.branch_index(c);
        const Branch& br = f.branches()[bi];
        w_radius /= rat_abs(br.slope());
        c = f.evaluate(c);
      }
      BoxSet wbox = BoxSet::segment(c - tl.delta * w_radius, c + tl.delta * w_radius);
      if (!contains_mod_null(wbox, img)) {
        bt.shrink_ok = false;
        continue;
      }
      // margin: W-halfwidth minus the image's reach from the center
      Rat reach(0);
      for (const auto& s : img.segments())
        reach = rat_max(reach, rat_max(rat_abs(s.hi - c), rat_abs(s.lo - c)));
      Rat margin = tl.delta * w_radius - reach;
      if (!have_margin || margin < bt.worst_shrink_margin) {
        bt.worst_shrink_margin = margin;
        have_margin = true;
      }
    }
  }
  if (!have_margin) bt.worst_shrink_margin = Rat(0);
}

PipelineReport pipeline_step3(const CircleMap& f, const Rat& eps,
                              const PipelineConfig& cfg, TowerLinearization tl,
                              BranchTree bt, PatchedMap g) {
  PipelineReport rep{std::move(tl), std::move(bt), std::move(g)};
  const Rat& delta = rep.tl.delta;
  const int k = rep.tl.k, n = rep.tl.n;

  // K: all V-boxes at levels k..n
  {
    std::vector<Box> kboxes;
    for (int i = k; i <= n; ++i)
      for (const auto& b : rep.bt.boxes[i])
        kboxes.push_back(Box{Interval{b.center - (1 - delta) * b.radius,
                                      b.center + (1 - delta) * b.radius}});
    rep.K = BoxSet::from_boxes(1, kboxes);
  }
  rep.m_K = rep.K.measure();

  // the four-part complement ledger
  rep.part_I = 1 - rep.tl.fill_sum;
  rep.part_II = Rat(0);
  for (int i = 0; i <= n; ++i) {
    std::vector<Box> u;
    for (const auto& b : rep.bt.boxes[i])
      u.push_back(Box{Interval{b.center - b.radius, b.center + b.radius}});
    BoxSet uset = BoxSet::from_boxes(1, u);
    rep.part_II += rep.tl.Q_measures[i] - intersection_measure(rep.tl.Q[i], uset);
  }
  rep.part_III = Rat(0);
  for (int i = 0; i <= n; ++i)
    for (const auto& b : rep.bt.boxes[i])
      rep.part_III += 2 * delta * b.radius;  // m(U-box) - m(V-box)
  rep.part_IV = Rat(0);
  for (int i = 0; i < k; ++i)
    for (const auto& b : rep.bt.boxes[i])
      rep.part_IV += 2 * (1 - delta) * b.radius;

  rep.I_ok = rep.part_I < eps;
  rep.II_ok = rep.part_II < eps;
  rep.III_ok = rep.part_III <= eps;
  rep.IV_ok = rep.part_IV < eps;

  rep.complement_measure = 1 - rep.m_K;
  rep.complement_ok = rep.complement_measure < 4 * eps;
  {
    // ledger identity: the four parts partition the complement
    Rat sum = rep.part_I + rep.part_II + rep.part_III + rep.part_IV;
    if (sum != rep.complement_measure)
      throw std::logic_error("pipeline: complement decomposition mismatch: " +
                             rat_str(sum) + " vs " + rat_str(rep.complement_measure));
  }

  BoxSet img = rep.g.image_iterate(rep.K, k);
  rep.image_measure = img.measure();
  rep.image_eps_ok = rep.image_measure < eps;

  rep.certificate = verify_certificate(rep.g, rep.K, k, 4 * eps);
  rep.best_valid_eps = rat_max(rep.complement_measure, rep.image_measure);

  rep.c1_ftilde_to_g = rep.g.c1_bound_to_base();
  rep.c1_f_to_g = rep.tl.c1_f_to_ftilde + rep.c1_ftilde_to_g;
  rep.c1_budget_ok = rep.c1_f_to_g <= cfg.c1_budget;
  return rep;
}

PipelineReport run_pipeline(const CircleMap& f, const Rat& eps,
                            const PipelineConfig& cfg) {
  TowerLinearization tl = pipeline_step1(f, eps, cfg);
  BranchTree bt;
  PatchedMap g(f);
  pipeline_step2(f, eps, cfg, tl, bt, g);
  return pipeline_step3(f, eps, cfg, std::move(tl), std::move(bt), std::move(g));
}

nlohmann::json PipelineReport::to_json() const {
  nlohmann::json j;
  j["parameters"] = {{"eps", rat_str(tl.eps)},
                     {"delta", rat_str(tl.delta)},
                     {"kappa", rat_str(tl.kappa)},
                     {"k", tl.k},
                     {"k_same_eps_budget", tl.k_paper},
                     {"n", tl.n},
                     {"tau", rat_str(bt.tau)}};
  j["tower"] = tower_report(tl.tower);
  j["tower_open_separation"] = tl.open_ok;
  nlohmann::json qm = nlohmann::json::array();
  for (const auto& m : tl.Q_measures) qm.push_back(rat_str(m));
  j["Q_measures"] = qm;
  j["rok3"] = {{"low_sum", rat_str(tl.low_sum)},
               {"low_ok", tl.rok3_low_ok},
               {"fill_sum", rat_str(tl.fill_sum)},
               {"fill_sum_dec", rat_decimal(tl.fill_sum)},
               {"fill_ok", tl.rok3_fill_ok}};
  std::size_t total_boxes = 0;
  for (const auto& lv : bt.boxes) total_boxes += lv.size();
  j["branch_tree"] = {{"boxes_total", total_boxes},
                      {"vitali_deficit", rat_str(bt.vitali_deficit)},
                      {"vitali_ok", bt.vitali_ok},
                      {"chains_checked", bt.chains_checked},
                      {"shrink_ok", bt.shrink_ok},
                      {"worst_shrink_margin", rat_str(bt.worst_shrink_margin)}};
  j["decomposition"] = {
      {"I", {{"value", rat_str(part_I)}, {"dec", rat_decimal(part_I)}, {"ok", I_ok}}},
      {"II", {{"value", rat_str(part_II)}, {"dec", rat_decimal(part_II)}, {"ok", II_ok}}},
      {"III", {{"value", rat_str(part_III)}, {"dec", rat_decimal(part_III)}, {"ok", III_ok}}},
      {"IV", {{"value", rat_str(part_IV)}, {"dec", rat_decimal(part_IV)}, {"ok", IV_ok}}}};
  j["K_measure"] = rat_str(m_K);
  j["K_measure_dec"] = rat_decimal(m_K);
  j["K_components"] = K.component_count();
  j["complement"] = {{"value", rat_str(complement_measure)},
                     {"dec", rat_decimal(complement_measure)},
                     {"required_lt", rat_str(4 * tl.eps)},
                     {"ok", complement_ok}};
  j["image"] = {{"value", rat_str(image_measure)},
                {"dec", rat_decimal(image_measure)},
                {"required_lt_eps", rat_str(tl.eps)},
                {"ok", image_eps_ok}};
  j["certificate_4eps"] = {{"pass", certificate.pass},
                           {"detail", certificate.detail}};
  j["best_valid_eps"] = rat_str(best_valid_eps);
  j["best_valid_eps_dec"] = rat_decimal(best_valid_eps);
  j["c1"] = {{"f_to_ftilde", rat_str(tl.c1_f_to_ftilde)},
             {"ftilde_to_g", rat_str(c1_ftilde_to_g)},
             {"f_to_g", rat_str(c1_f_to_g)},
             {"budget_ok", c1_budget_ok}};
  j["all_ok"] = all_ok();
  return j;
}

}  // namespace acim
