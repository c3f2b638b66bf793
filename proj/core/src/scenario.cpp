#include "nmsmc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "nmsmc/errors.hpp"
#include "nmsmc/io.hpp"
#include "nmsmc/parallel.hpp"

namespace nmsmc {

namespace {

using nlohmann::json;

std::string proposal_name(Proposal p) {
  return p == Proposal::bootstrap ? "bootstrap" : "locally_optimal";
}

Proposal proposal_from_name(const std::string& name) {
  if (name == "bootstrap") return Proposal::bootstrap;
  if (name == "locally_optimal" || name == "optimal") return Proposal::locally_optimal;
  throw ConfigError("proposal: unknown value '" + name + "'");
}

Scenario make(std::string name, std::string description) {
  Scenario s;
  s.name = std::move(name);
  s.description = std::move(description);
  return s;
}

template <typename T>
T field(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(key) + ": wrong type");
  }
}

std::size_t count_field(const json& j, const char* key, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(std::string(key) + ": must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace

void Scenario::validate() const {
  if (name.empty()) throw ConfigError("name: must not be empty");
  if (horizon < 2) throw ConfigError("T: must be at least 2");
  if (!(input_magnitude > 0.0) || !std::isfinite(input_magnitude)) {
    throw ConfigError("input_magnitude: must be positive");
  }
  if (!(sigma_x >= 0.0) || !std::isfinite(sigma_x)) throw ConfigError("sigma_x: must be >= 0");
  if (!(sigma_y > 0.0) || !std::isfinite(sigma_y)) throw ConfigError("sigma_y: must be positive");
  if (!(ts > 0.0) || !std::isfinite(ts)) throw ConfigError("ts: must be positive");
  theta_true.validate();
  if (n_particles < 1) throw ConfigError("n_particles: must be at least 1");
  if (iterations < 1) throw ConfigError("iterations: must be at least 1");
  if (n_chains < 1) throw ConfigError("n_chains: must be at least 1");
  if (stage1_iterations < 2) throw ConfigError("stage1_iterations: must be at least 2");
  if (stage1_discard + 2 > stage1_iterations) {
    throw ConfigError("stage1_discard: must leave at least two pilot samples");
  }
}

std::vector<Scenario> builtin_scenarios() {
  std::vector<Scenario> out;
  out.push_back(make("base", "reference record, T = 930, unit PRBS, uniform prior"));

  Scenario s = make("tlen_635", "shorter record, T = 635");
  s.horizon = 635;
  out.push_back(s);

  s = make("tlen_1890", "longer record, T = 1890");
  s.horizon = 1890;
  out.push_back(s);

  s = make("mag5", "PRBS magnitude 5");
  s.input_magnitude = 5.0;
  out.push_back(s);

  s = make("prior_gauss", "truncated Gaussian prior on the same box");
  s.prior_kind = PriorKind::truncated_gaussian;
  out.push_back(s);

  s = make("snr_high", "measurement noise sigma_y = 0.002");
  s.sigma_y = 0.002;
  out.push_back(s);
  return out;
}

std::vector<ScenarioInfo> list_scenarios() {
  std::vector<ScenarioInfo> out;
  for (const auto& s : builtin_scenarios()) out.push_back({s.name, s.description});
  return out;
}

Scenario scenario_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("scenario must be a JSON object");

  static const std::vector<std::string> known{
      "name",       "description", "T",           "input_magnitude",   "prior",
      "sigma_x",    "sigma_y",     "ts",          "theta_true",        "n_particles",
      "iterations", "n_chains",    "seed",        "stage1_iterations", "stage1_discard",
      "proposal",   "dataset",     "base"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError(key + ": unknown scenario field");
    }
  }

  Scenario s = load_scenario(field<std::string>(j, "base", "base"));
  s.name = field<std::string>(j, "name", s.name);
  s.description = field<std::string>(j, "description", s.description);
  s.horizon = count_field(j, "T", s.horizon);
  s.input_magnitude = field<double>(j, "input_magnitude", s.input_magnitude);
  if (j.contains("prior")) {
    try {
      s.prior_kind = prior_kind_from_string(field<std::string>(j, "prior", ""));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("prior: ") + e.what());
    }
  }
  s.sigma_x = field<double>(j, "sigma_x", s.sigma_x);
  s.sigma_y = field<double>(j, "sigma_y", s.sigma_y);
  s.ts = field<double>(j, "ts", s.ts);
  if (j.contains("theta_true")) s.theta_true = parse_theta_json(j["theta_true"].dump());
  s.n_particles = count_field(j, "n_particles", s.n_particles);
  s.iterations = count_field(j, "iterations", s.iterations);
  s.n_chains = count_field(j, "n_chains", s.n_chains);
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ConfigError("seed: must be a non-negative integer");
    s.seed = j["seed"].get<std::uint64_t>();
  }
  s.stage1_iterations = count_field(j, "stage1_iterations", s.stage1_iterations);
  s.stage1_discard = count_field(j, "stage1_discard", s.stage1_iterations / 2);
  s.dataset = field<std::string>(j, "dataset", s.dataset);
  if (j.contains("proposal")) s.proposal = proposal_from_name(field<std::string>(j, "proposal", ""));
  s.validate();
  return s;
}

Scenario load_scenario(const std::string& name_or_path) {
  for (const auto& s : builtin_scenarios()) {
    if (s.name == name_or_path) return s;
  }
  if (std::filesystem::exists(name_or_path)) return scenario_from_json(read_text_file(name_or_path));
  std::string names;
  for (const auto& s : builtin_scenarios()) names += (names.empty() ? "" : ", ") + s.name;
  throw ConfigError("scenario: '" + name_or_path + "' is neither a builtin (" + names +
                    ") nor a file");
}

std::string scenario_to_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["description"] = s.description;
  j["T"] = s.horizon;
  j["input_magnitude"] = s.input_magnitude;
  j["prior"] = to_string(s.prior_kind);
  j["sigma_x"] = s.sigma_x;
  j["sigma_y"] = s.sigma_y;
  j["ts"] = s.ts;
  j["theta_true"] = json::parse(theta_json(s.theta_true));
  j["n_particles"] = s.n_particles;
  j["iterations"] = s.iterations;
  j["n_chains"] = s.n_chains;
  j["seed"] = s.seed;
  j["stage1_iterations"] = s.stage1_iterations;
  j["stage1_discard"] = s.stage1_discard;
  j["proposal"] = proposal_name(s.proposal);
  if (!s.dataset.empty()) j["dataset"] = s.dataset;
  return j.dump(2) + "\n";
}

void apply_full_scale(Scenario& s) {
  s.iterations = 20000;
  s.n_chains = 5;
}

Prior scenario_prior(const Scenario& s) { return Prior::battery(s.prior_kind); }

ModelBuilder scenario_builder(const Scenario& s) {
  return battery_model_builder(s.ts, s.horizon, s.sigma_x, s.sigma_y);
}

FilterConfig scenario_filter_config(const Scenario& s) {
  FilterConfig cfg;
  cfg.n_particles = s.n_particles;
  cfg.proposal = s.proposal;
  return cfg;
}

Dataset simulate_scenario(const Scenario& s) {
  s.validate();
  const auto u = gen_prbs(s.horizon + 1, s.input_magnitude, s.ts, s.seed);
  const FoModel model = build_model(s.theta_true, s.ts, s.horizon, s.sigma_x, s.sigma_y);
  Dataset data = simulate(model, u, s.seed);
  data.theta_true = s.theta_true;
  return data;
}

Dataset scenario_dataset(const Scenario& s) {
  if (s.dataset.empty()) return simulate_scenario(s);
  Dataset data = load_dataset(s.dataset);
  data.validate();
  if (data.horizon() != s.horizon) {
    throw ConfigError("T: scenario says " + std::to_string(s.horizon) + " but " + s.dataset +
                      " holds T = " + std::to_string(data.horizon()));
  }
  if (data.ts == 0.0) data.ts = s.ts;
  return data;
}

void write_posterior_artifacts(const std::filesystem::path& dir, const PosteriorSummary& summary,
                               std::span<const Chain> chains, const Prior& prior, double burn_in,
                               std::size_t kde_points, const std::string& scenario_name) {
  write_text_file(dir / "summary.json", summary_json(summary, scenario_name));
  auto write_curve = [&](const std::vector<double>& samples, std::span<const double> grid,
                         const std::filesystem::path& path) {
    std::vector<double> density(grid.size(), 0.0);
    const bool spread = samples.size() >= 2 &&
                        *std::min_element(samples.begin(), samples.end()) <
                            *std::max_element(samples.begin(), samples.end());
    if (spread) density = kde(samples, grid);
    std::ostringstream csv;
    write_kde_csv(csv, grid, density);
    write_text_file(path, csv.str());
  };
  for (std::size_t i = 0; i < summary.names.size(); ++i) {
    const auto grid = linspace(prior.lo[i], prior.hi[i], kde_points);
    write_curve(pooled_samples(chains, burn_in, i), grid, dir / ("kde_" + summary.names[i] + ".csv"));
    for (std::size_t c = 0; c < chains.size(); ++c) {
      write_curve(pooled_samples(chains.subspan(c, 1), burn_in, i), grid,
                  dir / ("kde_chain" + std::to_string(c) + "_" + summary.names[i] + ".csv"));
    }
  }
}

ScenarioResult run_scenario(const Scenario& s, const RunOptions& opts) {
  s.validate();
  ScenarioResult result;
  result.data = scenario_dataset(s);
  const Prior prior = scenario_prior(s);
  const ModelBuilder builder = scenario_builder(s);

  TuningConfig tuning;
  tuning.stage1_iterations = s.stage1_iterations;
  tuning.stage1_discard = s.stage1_discard;

  result.chains.resize(s.n_chains);
  parallel_for(s.n_chains, opts.jobs, [&](std::size_t c) {
    PmmhConfig cfg;
    cfg.iterations = s.iterations;
    cfg.filter_cfg = scenario_filter_config(s);
    cfg.seed = s.seed + c;
    result.chains[c] = tune_and_run(prior, builder, result.data, cfg, tuning);
  });

  const std::vector<std::string> names(kThetaNames.begin(), kThetaNames.end());
  result.summary = summarize(result.chains, opts.burn_in, &prior, names);

  if (!opts.out_dir.empty()) {
    const auto& dir = opts.out_dir;
    save_dataset(dir / "dataset.csv", result.data);
    write_text_file(dir / "scenario.json", scenario_to_json(s));
    const std::vector<std::string_view> cols(kThetaNames.begin(), kThetaNames.end());
    for (std::size_t c = 0; c < result.chains.size(); ++c) {
      std::ostringstream csv;
      write_chain_csv(csv, result.chains[c], cols);
      write_text_file(dir / ("chain_" + std::to_string(c) + ".csv"), csv.str());
      write_text_file(dir / ("chain_" + std::to_string(c) + "_tuning.json"),
                      tuning_meta_json(result.chains[c]));
    }
    write_posterior_artifacts(dir, result.summary, result.chains, prior, opts.burn_in,
                              opts.kde_points, s.name);
  }
  return result;
}

}  // namespace nmsmc
