// Command-line front end: towers, slicing verification, linearization,
// escape certificates, and the full pipeline, with JSON/CSV reports.
//
// Exit codes: 0 success/verified, 2 verification failed (witness in the
// report), 3 input error, 4 resource cap.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "acim/errors.hpp"
#include "acim/escape.hpp"
#include "acim/linearize.hpp"
#include "acim/pipeline.hpp"
#include "acim/rokhlin.hpp"
#include "acim/slicing.hpp"

using namespace acim;
namespace fs = std::filesystem;

namespace {

nlohmann::json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw input_error("cannot open " + path);
  nlohmann::json j;
  is >> j;
  return j;
}

void save_json(const fs::path& path, const nlohmann::json& j) {
  fs::create_directories(path.parent_path());
  std::ofstream os(path);
  os << j.dump(2) << "\n";
}

std::string out_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("ACIMTOOL_OUT")) return env;
  return "out";
}

struct Common {
  std::string map_path;
  std::string out;
  std::uint64_t seed = 1;
  int threads = 1;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exact tower / slicing / escape toolkit for circle maps"};
  app.require_subcommand(1);

  Common c;

  // ---- tower
  auto* tower = app.add_subcommand("tower", "build a Rokhlin tower");
  std::string t_n0 = "4", t_l = "1", t_eps0 = "1/10";
  int t_depth = 20;
  std::size_t t_cap = 1000000;
  bool t_open = false;
  std::string t_slack = "0";
  tower->add_option("--map", c.map_path, "map spec JSON")->required();
  tower->add_option("--n0", t_n0, "tower height");
  tower->add_option("--l", t_l, "low-level count");
  tower->add_option("--eps0", t_eps0, "tower tolerance (rational)");
  tower->add_option("--depth", t_depth, "hat truncation depth T");
  tower->add_option("--cap", t_cap, "component cap");
  tower->add_flag("--open", t_open, "apply the open refinement");
  tower->add_option("--slack", t_slack, "open-refinement slack (rational)");
  tower->add_option("--out", c.out, "output directory");
  tower->add_option("--seed", c.seed, "seed (recorded)");
  tower->add_option("--threads", c.threads, "thread cap");

  // ---- slice-verify
  auto* slice = app.add_subcommand("slice-verify", "verify the shrink inclusion");
  std::string s_matrices, s_eps = "3/10", s_delta = "2/5";
  int s_samples = 10000;
  slice->add_option("--matrices", s_matrices, "matrix sequence JSON")->required();
  slice->add_option("--eps", s_eps, "derivative closeness (rational)");
  slice->add_option("--delta", s_delta, "box parameter (rational)");
  slice->add_option("--samples", s_samples, "samples per index");
  slice->add_option("--out", c.out, "output directory");
  slice->add_option("--seed", c.seed, "sampling seed");
  slice->add_option("--threads", c.threads, "thread cap");

  // ---- linearize
  auto* lin = app.add_subcommand("linearize", "locally linearize a map on a set");
  std::string l_u, l_gamma = "1/5", l_r0 = "1/1000", l_delta = "1/16";
  lin->add_option("--map", c.map_path, "map spec JSON")->required();
  lin->add_option("--u", l_u, "target open set JSON (BoxSet); default (0,1)");
  lin->add_option("--gamma", l_gamma, "volume-fraction tolerance");
  lin->add_option("--r0", l_r0, "ball radius bound");
  lin->add_option("--delta", l_delta, "bump shoulder (needs delta < gamma/2)");
  lin->add_option("--out", c.out, "output directory");
  lin->add_option("--seed", c.seed, "seed (recorded)");
  lin->add_option("--threads", c.threads, "thread cap");

  // ---- escape
  auto* esc = app.add_subcommand("escape", "verify or search escape certificates");
  std::string e_cert, e_eps = "1/10";
  int e_nmax = 6, e_budget = 64, e_grid = 65536;
  bool e_search = false;
  esc->add_option("--map", c.map_path, "map spec JSON (PatchedMap or CircleMap)")->required();
  esc->add_option("--cert", e_cert, "certificate JSON to verify");
  esc->add_flag("--search", e_search, "search for a certificate");
  esc->add_option("--eps", e_eps, "escape level (rational)");
  esc->add_option("--nmax", e_nmax, "max iterate for the search");
  esc->add_option("--budget", e_budget, "candidate budget");
  esc->add_option("--grid", e_grid, "oracle grid resolution");
  esc->add_option("--out", c.out, "output directory");
  esc->add_option("--seed", c.seed, "oracle sampling seed");
  esc->add_option("--threads", c.threads, "thread cap");

  // ---- pipeline
  auto* pipe = app.add_subcommand("pipeline", "full construction run");
  std::string p_eps = "2/5", p_budget = "256", p_tau = "0", p_delta = "0";
  int p_T = 0, p_grid = 65536;
  std::size_t p_cap = 1000000;
  pipe->add_option("--map", c.map_path, "map spec JSON")->required();
  pipe->add_option("--eps", p_eps, "target escape level (rational)");
  pipe->add_option("--c1-budget", p_budget, "compressor C1 budget (rational)");
  pipe->add_option("--delta", p_delta, "override delta (rational; 0 = 3eps/4)");
  pipe->add_option("--tau", p_tau, "box aspect (rational; 0 = delta/4)");
  pipe->add_option("--depth", p_T, "tower truncation depth (0 = auto)");
  pipe->add_option("--grid", p_grid, "oracle grid resolution");
  pipe->add_option("--cap", p_cap, "component cap");
  pipe->add_option("--out", c.out, "output directory");
  pipe->add_option("--seed", c.seed, "oracle sampling seed");
  pipe->add_option("--threads", c.threads, "thread cap");

  CLI11_PARSE(app, argc, argv);

  try {
    fs::path od(out_dir(c.out));
    nlohmann::json cfg_echo = {{"seed", c.seed}, {"threads", c.threads}};

    if (*tower) {
      CircleMap f = CircleMap::from_json(load_json(c.map_path));
      RokhlinConfig rc;
      rc.component_cap = t_cap;
      Tower t = build_tower(f, std::stoi(t_n0), std::stoi(t_l),
                            parse_rat(t_eps0), t_depth, rc);
      if (t_open) t = open_refinement(f, t, parse_rat(t_slack), rc);
      nlohmann::json rep = tower_report(t);
      rep["config"] = cfg_echo;
      rep["config"]["map"] = c.map_path;
      save_json(od / "tower_report.json", rep);
      std::cout << (t.all_ok() ? "PASS" : "FAIL") << " tower: fill = "
                << rat_decimal(t.fill) << " (need > " << rat_str(1 - t.eps0)
                << "), low = " << rat_decimal(t.low_sum) << " (need < "
                << rat_str(frac(t.l, t.n0) + t.eps0) << "), disjoint = "
                << (t.disjoint_ok ? "yes" : "NO") << "\n";
      return t.all_ok() ? 0 : 2;
    }

    if (*slice) {
      nlohmann::json jm = load_json(s_matrices);
      std::vector<MatQ> L;
      for (const auto& m : jm.at("matrices")) L.push_back(matq_from_json(m));
      NormalizedSeq seq = normalize_sequence(L);
      SlicingPlan plan = make_plan(seq, parse_rat(s_eps), parse_rat(s_delta));
      nlohmann::json rep;
      rep["plan"] = plan.to_json();
      rep["config"] = cfg_echo;
      bool all = true;
      nlohmann::json verdicts = nlohmann::json::array();
      for (int i = plan.k; i <= seq.n; ++i) {
        ShrinkVerdict v = verify_shrink(seq, plan, i, s_samples, c.seed);
        all = all && v.pass;
        nlohmann::json jv = {{"i", i},
                             {"pass", v.pass},
                             {"samples", v.samples_checked},
                             {"worst_margin", v.worst_margin}};
        if (!v.pass) jv["counterexample"] = v.counterexample;
        verdicts.push_back(jv);
      }
      rep["verdicts"] = verdicts;
      save_json(od / "slice_report.json", rep);
      std::cout << (all ? "PASS" : "FAIL") << " shrink inclusion for i in ["
                << plan.k << "," << seq.n << "]\n";
      return all ? 0 : 2;
    }

    if (*lin) {
      CircleMap f = CircleMap::from_json(load_json(c.map_path));
      BoxSet U = l_u.empty() ? BoxSet::segment(frac(1, 64), frac(63, 64))
                             : boxset_from_json(load_json(l_u));
      LinearizeResult r = linearize_on(f, U, parse_rat(l_gamma),
                                       parse_rat(l_r0), parse_rat(l_delta));
      bool locally_linear = check_locally_linear(r.map, r.V);
      nlohmann::json rep = {{"config", cfg_echo},
                            {"map", r.map.to_json()},
                            {"V", boxset_to_json(r.V)},
                            {"ratio", rat_str(r.ratio)},
                            {"ratio_dec", rat_decimal(r.ratio)},
                            {"c1_upper", rat_str(r.c1_upper)},
                            {"c1_upper_dec", rat_decimal(r.c1_upper)},
                            {"locally_linear", locally_linear}};
      save_json(od / "linearize_report.json", rep);
      bool ok = locally_linear && r.ratio > 1 - parse_rat(l_gamma);
      std::cout << (ok ? "PASS" : "FAIL") << " linearize: m(V)/m(U) = "
                << rat_decimal(r.ratio) << ", C1 bound = "
                << rat_decimal(r.c1_upper) << "\n";
      return ok ? 0 : 2;
    }

    if (*esc) {
      nlohmann::json jm = load_json(c.map_path);
      PatchedMap g = jm.contains("patches") ? PatchedMap::from_json(jm)
                                            : PatchedMap(CircleMap::from_json(jm));
      Rat eps = parse_rat(e_eps);
      AveragedMeasure avg = kb_average(g, 24, e_grid, 32, c.seed);
      write_density_csv((od / "density.csv").string(), avg);
      write_concentration_csv((od / "concentration.csv").string(), avg,
                              {0.1, 0.25, 0.5, 0.75, 0.9});
      fs::create_directories(od);
      if (!e_cert.empty()) {
        nlohmann::json jc = load_json(e_cert);
        BoxSet K = boxset_from_json(jc.at("K"));
        int N = jc.at("N").get<int>();
        CertVerdict v = verify_certificate(g, K, N, eps);
        EscapeCertificate ec{K, N, eps, v.mass, v.image_measure, true};
        save_json(od / "certificate_report.json", certificate_to_json(ec, v));
        std::cout << (v.pass ? "PASS " : "FAIL ") << v.detail << "\n";
        return v.pass ? 0 : 2;
      }
      if (e_search) {
        SearchResult r = search_certificate(g, eps, e_nmax, e_budget, c.seed);
        if (r.found) {
          CertVerdict v = verify_certificate(g, r.cert.K, r.cert.N, eps);
          save_json(od / "certificate_report.json",
                    certificate_to_json(r.cert, v));
          std::cout << "PASS found certificate: N = " << r.cert.N
                    << ", m(K) = " << rat_decimal(r.cert.mass) << ", m(f^N K) = "
                    << rat_decimal(r.cert.image_measure) << "\n";
          return 0;
        }
        std::cout << "FAIL no escape found at this budget (not a proof of an "
                     "invariant density)\n";
        return 2;
      }
      std::cout << "escape: provide --cert or --search\n";
      return 3;
    }

    if (*pipe) {
      CircleMap f = CircleMap::from_json(load_json(c.map_path));
      PipelineConfig pc;
      pc.c1_budget = parse_rat(p_budget);
      if (parse_rat(p_delta) > 0) pc.delta = parse_rat(p_delta);
      if (parse_rat(p_tau) > 0) pc.tau = parse_rat(p_tau);
      pc.T = p_T;
      pc.component_cap = p_cap;
      pc.seed = c.seed;
      PipelineReport rep = run_pipeline(f, parse_rat(p_eps), pc);
      nlohmann::json j = rep.to_json();
      j["config"] = cfg_echo;
      j["config"]["map"] = c.map_path;
      save_json(od / "pipeline_report.json", j);
      // before/after densities for the oracle comparison
      AveragedMeasure before = kb_average(PatchedMap(f), 24, p_grid, 32, c.seed);
      AveragedMeasure after = kb_average(rep.g, 24, p_grid, 32, c.seed);
      write_density_csv((od / "density_before.csv").string(), before);
      write_density_csv((od / "density_after.csv").string(), after);
      std::cout << (rep.all_ok() ? "PASS" : "FAIL")
                << " pipeline: m(K) = " << rat_decimal(rep.m_K)
                << ", m(g^k K) = " << rat_decimal(rep.image_measure)
                << ", m(M\\K) = " << rat_decimal(rep.complement_measure)
                << " (need < " << rat_str(4 * rep.tl.eps) << ")\n";
      return rep.all_ok() ? 0 : 2;
    }
  } catch (const input_error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 3;
  } catch (const precondition_error& e) {
    std::cerr << "precondition violated: " << e.what() << "\n";
    return 3;
  } catch (const resource_error& e) {
    std::cerr << "resource cap: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 3;
}
