// End-to-end construction for an exact-mode expanding circle map f and a
// target eps: build the open tower, take the tower levels as the linear
// zones (piecewise-affine f is already locally linear), pack the base with
// thin boxes, hang compressor patches along every backward branch chain, and
// assemble the escape certificate with a fully exact measure ledger.
//
// Every inequality the construction should satisfy is verified on the exact
// output sets and reported as a flag with its value; a failed inequality
// never aborts the run, it is surfaced in the report (and in the CLI exit
// code).

#pragma once

#include <cstdint>
#include <vector>

#include "acim/escape.hpp"
#include "acim/geometry.hpp"
#include "acim/maps.hpp"
#include "acim/rational.hpp"
#include "acim/rokhlin.hpp"

#include "json.hpp"

namespace acim {

struct PipelineConfig {
  Rat delta;              // 0 => 3 eps / 4
  Rat c1_budget = Rat(256);  // compressor C1 budget (decoupled from eps)
  int k_override = 0;     // 0 => smallest k the budget admits
  int T = 0;              // tower truncation depth; 0 => 2 (n+1)
  Rat tau;                // box aspect; 0 => delta/4
  Rat open_slack;         // 0 => eps/16
  std::size_t component_cap = 1000000;
  std::uint64_t seed = 1;
  RokhlinConfig rokhlin;
};

struct TowerLinearization {
  int k = 1, n = 0;       // l = k, n0 = n + 1
  int k_paper = 0;        // k the same-eps derivative budget would force
  Rat eps, delta, kappa;
  Tower tower;            // open variant when separation succeeded
  bool open_ok = false;
  std::vector<BoxSet> Q;  // Q_0 .. Q_n
  std::vector<Rat> Q_measures;
  Rat low_sum, fill_sum;  // sum_{i<k} m(Q_i), sum_{i<=n} m(Q_i)
  bool rok3_low_ok = false;   // low_sum < eps
  bool rok3_fill_ok = false;  // fill_sum > 1 - eps
  Rat c1_f_to_ftilde;     // 0 for affine inputs (identity linearization)
};

struct BranchBox {
  int level = 0;
  Rat center;
  Rat radius;      // the U-box half-length
};

struct BranchTree {
  Rat tau;
  std::vector<std::vector<BranchBox>> boxes;  // per level 0..n
  Rat vitali_deficit;      // m(Q_0 \ union of level-0 boxes)
  bool vitali_ok = false;  // deficit <= eps m(Q_0)
  bool shrink_ok = false;  // g^k(V-box) inside the W-box, every chain, exact
  std::size_t chains_checked = 0;
  Rat worst_shrink_margin;  // min over chains of W-radius minus image radius
};

struct PipelineReport {
  TowerLinearization tl;
  BranchTree bt;
  PatchedMap g;
  BoxSet K;
  Rat m_K;
  Rat part_I, part_II, part_III, part_IV;
  bool I_ok = false, II_ok = false, III_ok = false, IV_ok = false;
  Rat complement_measure;        // m(M \ K), equals the four parts' sum
  bool complement_ok = false;    // < 4 eps
  Rat image_measure;             // m(g^k K), exact
  bool image_eps_ok = false;     // < eps
  CertVerdict certificate;       // at level 4 eps
  Rat best_valid_eps;            // smallest level at which (K, k) verifies
  Rat c1_ftilde_to_g;            // certified
  Rat c1_f_to_g;
  bool c1_budget_ok = false;

  bool all_ok() const {
    return tl.rok3_low_ok && tl.rok3_fill_ok && bt.vitali_ok && bt.shrink_ok &&
           I_ok && II_ok && III_ok && IV_ok && complement_ok && image_eps_ok;
  }

  nlohmann::json to_json() const;
};

PipelineReport run_pipeline(const CircleMap& f, const Rat& eps,
                            const PipelineConfig& cfg = {});

// The individual steps, exposed for tests and the CLI.
TowerLinearization pipeline_step1(const CircleMap& f, const Rat& eps,
                                  const PipelineConfig& cfg);
void pipeline_step2(const CircleMap& f, const Rat& eps,
                    const PipelineConfig& cfg, TowerLinearization& tl,
                    BranchTree& bt_out, PatchedMap& g_out);
PipelineReport pipeline_step3(const CircleMap& f, const Rat& eps,
                              const PipelineConfig& cfg, TowerLinearization tl,
                              BranchTree bt, PatchedMap g);

}  // namespace acim
