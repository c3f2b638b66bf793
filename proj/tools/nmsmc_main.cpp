#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "nmsmc/analysis.hpp"
#include "nmsmc/errors.hpp"
#include "nmsmc/io.hpp"
#include "nmsmc/pmmh.hpp"
#include "nmsmc/scenario.hpp"
#include "nmsmc/smc.hpp"

namespace fs = std::filesystem;
using namespace nmsmc;

namespace {

struct Overrides {
  std::uint64_t seed = 0;
  std::size_t particles = 0;
  std::size_t iterations = 0;
  std::size_t chains = 0;
  std::size_t horizon = 0;
  std::size_t stage1 = 0;
  std::string proposal;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Master seed (beats NMSMC_SEED)");
  cmd->add_option("--particles", o.particles, "Particles per filter run");
  cmd->add_option("--iterations", o.iterations, "PMMH iterations per chain after tuning");
  cmd->add_option("--chains", o.chains, "Number of independent chains");
  cmd->add_option("--T", o.horizon, "Record length minus one");
  cmd->add_option("--stage1", o.stage1, "Pilot iterations (half are discarded)");
  cmd->add_option("--proposal", o.proposal, "bootstrap or locally_optimal");
}

std::uint64_t parse_seed(const std::string& text) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != text.size() || text.empty() || text.front() == '-') {
    throw ConfigError("NMSMC_SEED: not a non-negative integer: '" + text + "'");
  }
  return v;
}

Scenario resolve(const std::string& name, CLI::App* cmd, const Overrides& o, bool full_scale) {
  Scenario s = load_scenario(name);
  if (full_scale) apply_full_scale(s);
  if (const char* env = std::getenv("NMSMC_SEED"); env && *env) s.seed = parse_seed(env);
  if (cmd->count("--seed")) s.seed = o.seed;
  if (cmd->count("--particles")) s.n_particles = o.particles;
  if (cmd->count("--iterations")) s.iterations = o.iterations;
  if (cmd->count("--chains")) s.n_chains = o.chains;
  if (cmd->count("--T")) s.horizon = o.horizon;
  if (cmd->count("--stage1")) {
    s.stage1_iterations = o.stage1;
    s.stage1_discard = o.stage1 / 2;
  }
  if (cmd->count("--proposal")) {
    if (o.proposal == "bootstrap") {
      s.proposal = Proposal::bootstrap;
    } else if (o.proposal == "locally_optimal") {
      s.proposal = Proposal::locally_optimal;
    } else {
      throw ConfigError("proposal: unknown value '" + o.proposal + "'");
    }
  }
  s.validate();
  return s;
}

void print_summary(const PosteriorSummary& sum) {
  std::printf("%-8s %12s %12s %12s %12s %12s %8s\n", "param", "mean", "sd", "q05", "q50", "q95",
              "overlap");
  for (std::size_t i = 0; i < sum.names.size(); ++i) {
    const auto& p = sum.params[i];
    const double ov = i < sum.overlap.size() ? sum.overlap[i] : -1.0;
    std::printf("%-8s %12.6g %12.6g %12.6g %12.6g %12.6g %8.4f\n", sum.names[i].c_str(), p.mean, p.sd,
                p.q05, p.q50, p.q95, ov);
  }
}

std::vector<fs::path> chain_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("chain_", 0) == 0 && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no chain_*.csv files in " + dir.string());
  return files;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fractional-order battery model identification by particle MCMC"};
  app.require_subcommand(1);
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());

  auto* scenarios_cmd = app.add_subcommand("scenarios", "List builtin scenarios");

  std::string scenario = "base";
  std::string out;
  Overrides ov;

  auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic dataset");
  sim_cmd->add_option("--scenario", scenario, "Builtin name or JSON file")->capture_default_str();
  sim_cmd->add_option("--out", out, "Output directory")->required();
  add_overrides(sim_cmd, ov);

  bool full_scale = false;
  std::size_t jobs = hw;
  double burn_in = 0.25;
  auto* infer_cmd = app.add_subcommand("infer", "Simulate and run tuned PMMH chains");
  infer_cmd->add_option("--scenario", scenario, "Builtin name or JSON file")->capture_default_str();
  infer_cmd->add_option("--out", out, "Output directory")->required();
  infer_cmd->add_flag("--full-scale", full_scale, "20000 iterations, five chains");
  infer_cmd->add_option("--jobs", jobs, "Worker threads")->capture_default_str();
  infer_cmd->add_option("--burn-in", burn_in, "Discarded fraction per chain")->capture_default_str();
  add_overrides(infer_cmd, ov);

  std::vector<std::size_t> candidates{16, 64, 128};
  double threshold = 0.10;
  std::size_t reps = 100;
  std::size_t thetas = 3;
  auto* sel_cmd = app.add_subcommand("select-n", "Choose the particle count");
  sel_cmd->add_option("--scenario", scenario, "Builtin name or JSON file")->capture_default_str();
  sel_cmd->add_option("--candidates", candidates, "Candidate particle counts")
      ->delimiter(',')
      ->capture_default_str();
  sel_cmd->add_option("--threshold", threshold, "Minimum conditional acceptance")->capture_default_str();
  sel_cmd->add_option("--reps", reps, "Filter repetitions per parameter")->capture_default_str();
  sel_cmd->add_option("--thetas", thetas, "Prior draws to test")->capture_default_str();
  sel_cmd->add_option("--jobs", jobs, "Worker threads")->capture_default_str();
  sel_cmd->add_option("--out", out, "Report JSON path (stdout when omitted)");
  add_overrides(sel_cmd, ov);

  std::string chains_dir;
  std::string prior_name;
  std::size_t kde_points = 256;
  auto* sum_cmd = app.add_subcommand("summarize", "Posterior summary of saved chains");
  sum_cmd->add_option("--chains", chains_dir, "Directory with chain_*.csv")->required();
  sum_cmd->add_option("--burn-in", burn_in, "Discarded fraction per chain")->capture_default_str();
  sum_cmd->add_option("--prior", prior_name, "uniform or truncated_gaussian (default: scenario.json)");
  sum_cmd->add_option("--out", out, "Output directory (default: the chains directory)");
  sum_cmd->add_option("--kde-points", kde_points, "KDE grid size")->capture_default_str();

  std::string theta_path;
  double fmin = 1e-4;
  double fmax = 2e3;
  std::size_t points = 200;
  auto* imp_cmd = app.add_subcommand("impedance", "Impedance spectrum of a parameter vector");
  imp_cmd->add_option("--theta", theta_path, "JSON file with R_inf, R1, C1, C2, alpha1, alpha2");
  imp_cmd->add_option("--fmin", fmin, "Lowest frequency in Hz")->capture_default_str();
  imp_cmd->add_option("--fmax", fmax, "Highest frequency in Hz")->capture_default_str();
  imp_cmd->add_option("--points", points, "Log-spaced frequencies")->capture_default_str();
  imp_cmd->add_option("--out", out, "CSV path (stdout when omitted)");

  std::string trace_path;
  auto* filt_cmd = app.add_subcommand("filter", "One particle filter run at the true parameters");
  filt_cmd->add_option("--scenario", scenario, "Builtin name or JSON file")->capture_default_str();
  filt_cmd->add_option("--trace", trace_path, "CSV path for k,ess,node_count,log_incr");
  add_overrides(filt_cmd, ov);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (scenarios_cmd->parsed()) {
      for (const auto& info : list_scenarios()) {
        std::printf("%-12s %s\n", info.name.c_str(), info.description.c_str());
      }
    } else if (sim_cmd->parsed()) {
      const Scenario s = resolve(scenario, sim_cmd, ov, false);
      const Dataset data = simulate_scenario(s);
      save_dataset(fs::path(out) / "dataset.csv", data);
      write_text_file(fs::path(out) / "scenario.json", scenario_to_json(s));
      std::printf("wrote %zu samples to %s\n", data.u.size(), (fs::path(out) / "dataset.csv").c_str());
    } else if (infer_cmd->parsed()) {
      const Scenario s = resolve(scenario, infer_cmd, ov, full_scale);
      RunOptions opts;
      opts.out_dir = out;
      opts.jobs = jobs;
      opts.burn_in = burn_in;
      const ScenarioResult res = run_scenario(s, opts);
      for (std::size_t c = 0; c < res.chains.size(); ++c) {
        const auto& t = res.chains[c].tuning;
        std::printf("chain %zu: stage1 acceptance %.3f, stage2 acceptance %.3f\n", c,
                    t.stage1.acceptance_rate, t.stage2.acceptance_rate);
      }
      print_summary(res.summary);
    } else if (sel_cmd->parsed()) {
      const Scenario s = resolve(scenario, sel_cmd, ov, false);
      const Dataset data = scenario_dataset(s);
      SelectionConfig cfg;
      cfg.candidates = candidates;
      cfg.threshold = threshold;
      cfg.n_reps = reps;
      cfg.n_theta = thetas;
      cfg.seed = s.seed;
      cfg.filter_cfg = scenario_filter_config(s);
      cfg.jobs = jobs;
      const SelectionReport rep = select_num_particles(scenario_prior(s), scenario_builder(s), data, cfg);
      const std::string json = selection_report_json(rep);
      if (out.empty()) {
        std::cout << json;
      } else {
        write_text_file(out, json);
        std::printf("chosen N = %zu (threshold %s)\n", rep.chosen, rep.threshold_met ? "met" : "not met");
      }
    } else if (sum_cmd->parsed()) {
      const fs::path dir(chains_dir);
      std::vector<Chain> chains;
      std::vector<std::string> names;
      for (const auto& f : chain_files(dir)) {
        std::vector<std::string> these;
        chains.push_back(load_chain(f, &these));
        if (names.empty()) names = these;
        if (these != names) throw IoError("column names differ in " + f.string());
      }
      PriorKind kind = PriorKind::uniform;
      std::string scenario_name;
      if (!prior_name.empty()) {
        kind = prior_kind_from_string(prior_name);
      } else if (fs::exists(dir / "scenario.json")) {
        const Scenario s = scenario_from_json(read_text_file(dir / "scenario.json"));
        kind = s.prior_kind;
        scenario_name = s.name;
      }
      const Prior prior = Prior::battery(kind);
      const PosteriorSummary sum = summarize(chains, burn_in, &prior, names);
      write_posterior_artifacts(out.empty() ? dir : fs::path(out), sum, chains, prior, burn_in,
                                kde_points, scenario_name);
      print_summary(sum);
    } else if (imp_cmd->parsed()) {
      const BatteryTheta theta = theta_path.empty() ? reference_theta() : load_theta(theta_path);
      theta.validate();
      std::ostringstream csv;
      write_impedance_csv(csv, theta, fmin, fmax, points);
      if (out.empty()) {
        std::cout << csv.str();
      } else {
        write_text_file(out, csv.str());
      }
    } else if (filt_cmd->parsed()) {
      const Scenario s = resolve(scenario, filt_cmd, ov, false);
      const Dataset data = scenario_dataset(s);
      const FoModel model = build_model(s.theta_true, s.ts, s.horizon, s.sigma_x, s.sigma_y);
      FilterConfig cfg = scenario_filter_config(s);
      cfg.seed = s.seed;
      const FilterOutput res = run_filter(model, data, cfg);
      std::printf("log-likelihood %s, final nodes %zu\n", format_double(res.log_likelihood).c_str(),
                  res.final_tree.node_count());
      if (!trace_path.empty()) {
        std::ostringstream csv;
        write_filter_trace(csv, res);
        write_text_file(trace_path, csv.str());
      }
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  }
  return 0;
}
