#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nmsmc/analysis.hpp"
#include "nmsmc/fom.hpp"
#include "nmsmc/pmmh.hpp"
#include "nmsmc/smc.hpp"

namespace nmsmc {

/// One synthetic identification experiment: data generation plus inference.
struct Scenario {
  std::string name = "base";
  std::string description;
  std::size_t horizon = 930;  // T; the record has T + 1 samples
  double input_magnitude = 1.0;
  PriorKind prior_kind = PriorKind::uniform;
  double sigma_x = 0.002;
  double sigma_y = 0.02;
  double ts = 5e-4;
  BatteryTheta theta_true = reference_theta();
  std::size_t n_particles = 128;
  std::size_t iterations = 2000;
  std::size_t n_chains = 3;
  std::uint64_t seed = 1;
  std::size_t stage1_iterations = 5000;
  std::size_t stage1_discard = 2500;
  Proposal proposal = Proposal::locally_optimal;
  /// CSV to load instead of simulating (its sidecar may be absent).
  std::string dataset;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct ScenarioInfo {
  std::string name;
  std::string description;
};

std::vector<Scenario> builtin_scenarios();
std::vector<ScenarioInfo> list_scenarios();

/// Builtin name, or a path to a flat JSON object whose keys are Scenario
/// fields; missing keys take the `base` values. Throws ConfigError / IoError.
Scenario load_scenario(const std::string& name_or_path);
Scenario scenario_from_json(const std::string& text);
std::string scenario_to_json(const Scenario& s);

/// Full-length runs: 20000 iterations per chain, five chains.
void apply_full_scale(Scenario& s);

Prior scenario_prior(const Scenario& s);
ModelBuilder scenario_builder(const Scenario& s);
FilterConfig scenario_filter_config(const Scenario& s);

/// PRBS input and simulated output; seeds derive from s.seed.
Dataset simulate_scenario(const Scenario& s);
/// simulate_scenario, or the `dataset` file when set (its length must be T + 1).
Dataset scenario_dataset(const Scenario& s);

struct RunOptions {
  std::filesystem::path out_dir;  // nothing is written when empty
  std::size_t jobs = 1;
  double burn_in = 0.25;
  std::size_t kde_points = 256;
};

struct ScenarioResult {
  Dataset data;
  std::vector<Chain> chains;
  PosteriorSummary summary;
};

/// Simulates, runs n_chains tuned PMMH chains (chain c uses seed s.seed + c)
/// and summarizes. With an output directory, writes dataset.csv/.json,
/// scenario.json, chain_<c>.csv, chain_<c>_tuning.json, kde_<param>.csv
/// (pooled), kde_chain<c>_<param>.csv and summary.json.
ScenarioResult run_scenario(const Scenario& s, const RunOptions& opts);

/// Writes summary.json, pooled kde_<param>.csv and per-chain
/// kde_chain<c>_<param>.csv for already-sampled chains. All KDEs share one
/// grid over the prior support; a constant sample gives an all-zero curve.
void write_posterior_artifacts(const std::filesystem::path& dir, const PosteriorSummary& summary,
                               std::span<const Chain> chains, const Prior& prior, double burn_in,
                               std::size_t kde_points, const std::string& scenario_name);

}  // namespace nmsmc
