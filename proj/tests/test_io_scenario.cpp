#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nmsmc/errors.hpp"
#include "nmsmc/io.hpp"
#include "nmsmc/scenario.hpp"

using namespace nmsmc;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("nmsmc_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Chain small_chain() {
  Chain c;
  c.dim = 6;
  const auto star = reference_theta().to_array();
  for (int t = 0; t < 4; ++t) {
    for (double v : star) c.samples.push_back(v * (1.0 + 0.01 * t) + 1e-17);
    c.loglik.push_back(t == 0 ? -std::numeric_limits<double>::infinity() : 2264.123456789012 + t);
    c.accepted.push_back(t % 2);
  }
  c.acceptance_rate = 0.5;
  return c;
}

std::vector<std::string_view> theta_columns() { return {kThetaNames.begin(), kThetaNames.end()}; }

}  // namespace

TEST_CASE("format_double round-trips exactly") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
    CHECK(std::stod(format_double(x)) == x);
  }
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(format_double(std::nan("")) == "nan");
}

TEST_CASE("dataset CSV and sidecar round trip") {
  Scenario s;
  s.horizon = 40;
  const Dataset data = simulate_scenario(s);
  const auto dir = scratch("dataset");
  save_dataset(dir / "d.csv", data);
  CHECK(fs::exists(dir / "d.json"));
  const auto meta = json::parse(read_text_file(dir / "d.json"));
  CHECK(meta["ts"] == 5e-4);
  CHECK(meta["sigma_y"] == 0.02);
  CHECK(meta["theta_true"]["R_inf"] == 0.01);

  std::istringstream first_line(read_text_file(dir / "d.csv"));
  std::string header;
  std::getline(first_line, header);
  CHECK(header == "k,u,y");

  const Dataset back = load_dataset(dir / "d.csv");
  CHECK(back.u == data.u);
  CHECK(back.y == data.y);
  CHECK(back.ts == data.ts);
  CHECK(back.seed == data.seed);
  REQUIRE(back.theta_true.has_value());
  CHECK(back.theta_true->c2 == 400.0);

  // Without a sidecar the samples still load.
  fs::remove(dir / "d.json");
  const Dataset bare = load_dataset(dir / "d.csv");
  CHECK(bare.y == data.y);
  CHECK_FALSE(bare.theta_true.has_value());
}

TEST_CASE("malformed datasets are I/O errors") {
  std::istringstream bad_header("k,y,u\n0,1,2\n1,1,2\n");
  CHECK_THROWS_AS(parse_dataset_csv(bad_header), IoError);
  std::istringstream bad_number("k,u,y\n0,1,abc\n1,1,2\n");
  CHECK_THROWS_AS(parse_dataset_csv(bad_number), IoError);
  CHECK_THROWS_AS(load_dataset("/nonexistent/dir/data.csv"), IoError);
}

TEST_CASE("chain CSV round trip") {
  const Chain c = small_chain();
  std::ostringstream os;
  write_chain_csv(os, c, theta_columns());
  const std::string text = os.str();
  CHECK(text.rfind("iter,R_inf,R1,C1,C2,alpha1,alpha2,loglik,accepted\n1,", 0) == 0);

  std::istringstream is(text);
  std::vector<std::string> names;
  const Chain back = parse_chain_csv(is, &names);
  CHECK(names == std::vector<std::string>{"R_inf", "R1", "C1", "C2", "alpha1", "alpha2"});
  CHECK(back.dim == 6);
  CHECK(back.samples == c.samples);
  CHECK(back.loglik == c.loglik);
  CHECK(back.accepted == c.accepted);
  CHECK(back.acceptance_rate == 0.5);

  std::istringstream truncated("iter,a,loglik,accepted\n1,0.5,1.0\n");
  CHECK_THROWS_AS(parse_chain_csv(truncated), IoError);
}

TEST_CASE("JSON artifacts carry the documented keys") {
  Chain c = small_chain();
  c.tuning.tuned = true;
  c.tuning.stage1 = StageInfo{10, 0.1, Eigen::MatrixXd::Identity(6, 6)};
  c.tuning.stage2 = StageInfo{4, 0.5, Eigen::MatrixXd::Identity(6, 6) * 2.0};
  c.tuning.stage1_discarded = 5;
  c.tuning.jitter_applied = true;
  c.tuning.jitter_scale = 1e-10;
  const auto meta = json::parse(tuning_meta_json(c));
  for (const char* key : {"tuned", "iterations", "acceptance_rate", "initial", "initial_loglik",
                          "stage1", "jitter", "stage2"}) {
    CHECK_MESSAGE(meta.contains(key), key);
  }
  CHECK(meta["stage1"]["discarded"] == 5);
  CHECK(meta["stage2"]["proposal_cov"][1][1] == 2.0);

  const std::vector<Chain> chains{c};
  const Prior prior = Prior::battery(PriorKind::uniform);
  const auto summary = summarize(chains, 0.0, &prior, {kThetaNames.begin(), kThetaNames.end()});
  const auto j = json::parse(summary_json(summary, "base"));
  CHECK(j["scenario"] == "base");
  CHECK(j["correlation"].size() == 6);
  for (const auto& name : kThetaNames) {
    const auto& p = j["parameters"][std::string(name)];
    for (const char* key : {"mean", "sd", "q05", "q50", "q95", "overlap"}) CHECK(p.contains(key));
  }
}

TEST_CASE("theta JSON accepts names or a plain array") {
  const BatteryTheta star = reference_theta();
  CHECK(parse_theta_json(theta_json(star)).to_array() == star.to_array());
  CHECK(parse_theta_json("[0.01, 0.2, 3.0, 400, 0.8, 0.5]").to_array() == star.to_array());
  CHECK_THROWS_AS(parse_theta_json("[1, 2]"), ConfigError);
  CHECK_THROWS_AS(parse_theta_json("{\"R_inf\": 0.01}"), ConfigError);
  CHECK_THROWS(parse_theta_json("not json"));
}

TEST_CASE("impedance and KDE CSV shapes") {
  std::ostringstream imp;
  write_impedance_csv(imp, reference_theta(), 1e-4, 2e3, 5);
  std::istringstream lines(imp.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "f,re,im,mag,phase");
  std::vector<double> freqs;
  while (std::getline(lines, line)) freqs.push_back(std::stod(line.substr(0, line.find(','))));
  REQUIRE(freqs.size() == 5);
  CHECK(freqs.front() == doctest::Approx(1e-4));
  CHECK(freqs.back() == doctest::Approx(2e3));
  CHECK(freqs[1] / freqs[0] == doctest::Approx(freqs[4] / freqs[3]));

  std::ostringstream k;
  const std::vector<double> grid{0.0, 1.0};
  const std::vector<double> dens{0.5, 0.25};
  write_kde_csv(k, grid, dens);
  CHECK(k.str() == "x,density\n0,0.5\n1,0.25\n");
}

TEST_CASE("builtin scenarios") {
  const auto list = list_scenarios();
  REQUIRE(list.size() == 6);
  std::vector<std::string> names;
  for (const auto& s : list) names.push_back(s.name);
  CHECK(names == std::vector<std::string>{"base", "tlen_635", "tlen_1890", "mag5", "prior_gauss", "snr_high"});
  CHECK(list[5].description.find("sigma_y = 0.002") != std::string::npos);

  const Scenario base = load_scenario("base");
  CHECK(base.horizon == 930);
  CHECK(base.n_particles == 128);
  CHECK(base.iterations == 2000);
  CHECK(base.n_chains == 3);
  CHECK(load_scenario("tlen_635").horizon == 635);
  CHECK(load_scenario("tlen_1890").horizon == 1890);
  CHECK(load_scenario("mag5").input_magnitude == 5.0);
  CHECK(load_scenario("prior_gauss").prior_kind == PriorKind::truncated_gaussian);
  CHECK(load_scenario("snr_high").sigma_y == 0.002);

  Scenario scaled = base;
  apply_full_scale(scaled);
  CHECK(scaled.iterations == 20000);
  CHECK(scaled.n_chains == 5);
}

TEST_CASE("scenario JSON round trip and overrides") {
  const Scenario mag = load_scenario("mag5");
  const Scenario back = scenario_from_json(scenario_to_json(mag));
  CHECK(scenario_to_json(back) == scenario_to_json(mag));

  const Scenario custom = scenario_from_json(R"({"base": "snr_high", "name": "quick", "T": 50, "n_chains": 1})");
  CHECK(custom.name == "quick");
  CHECK(custom.horizon == 50);
  CHECK(custom.sigma_y == 0.002);
  CHECK(custom.stage1_discard == custom.stage1_iterations / 2);

  const auto dir = scratch("scenario");
  write_text_file(dir / "s.json", R"({"name": "file", "T": 12})");
  CHECK(load_scenario((dir / "s.json").string()).horizon == 12);
}

TEST_CASE("invalid scenarios name the offending field") {
  auto message = [](const std::string& text) {
    try {
      scenario_from_json(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message(R"({"T": 1})").rfind("T:", 0) == 0);
  CHECK(message(R"({"n_chains": 0})").rfind("n_chains:", 0) == 0);
  CHECK(message(R"({"sigma_y": -1})").rfind("sigma_y:", 0) == 0);
  CHECK(message(R"({"iterations": "many"})").rfind("iterations:", 0) == 0);
  CHECK(message(R"({"prior": "laplace"})").rfind("prior:", 0) == 0);
  CHECK(message(R"({"proposal": "magic"})").rfind("proposal:", 0) == 0);
  CHECK(message(R"({"colour": "red"})") == "colour: unknown scenario field");
  CHECK(message(R"({"stage1_iterations": 10, "stage1_discard": 9})").rfind("stage1_discard:", 0) == 0);
  CHECK_THROWS_AS(load_scenario("no_such_scenario"), ConfigError);
}

TEST_CASE("scenario data are deterministic in the seed") {
  Scenario s;
  s.horizon = 30;
  const Dataset a = simulate_scenario(s);
  const Dataset b = simulate_scenario(s);
  CHECK(a.y == b.y);
  s.seed = 2;
  CHECK(simulate_scenario(s).y != a.y);

  const auto dir = scratch("external");
  save_dataset(dir / "ext.csv", a);
  Scenario ext;
  ext.horizon = 30;
  ext.dataset = (dir / "ext.csv").string();
  CHECK(scenario_dataset(ext).y == a.y);
  ext.horizon = 31;
  CHECK_THROWS_AS(scenario_dataset(ext), ConfigError);
}

TEST_CASE("run_scenario writes every artifact") {
  Scenario s;
  s.name = "tiny";
  s.horizon = 20;
  s.n_particles = 4;
  s.iterations = 12;
  s.n_chains = 2;
  s.stage1_iterations = 10;
  s.stage1_discard = 5;
  const auto dir = scratch("run");
  RunOptions opts;
  opts.out_dir = dir;
  opts.kde_points = 16;
  const auto result = run_scenario(s, opts);
  CHECK(result.chains.size() == 2);
  for (const char* f : {"dataset.csv", "dataset.json", "scenario.json", "summary.json", "chain_0.csv",
                        "chain_1.csv", "chain_0_tuning.json", "kde_R_inf.csv", "kde_chain1_alpha2.csv"}) {
    CHECK_MESSAGE(fs::exists(dir / f), f);
  }
  std::vector<std::string> names;
  const Chain c0 = load_chain(dir / "chain_0.csv", &names);
  CHECK(c0.size() == 12);
  CHECK(c0.samples == result.chains[0].samples);
  CHECK(scenario_from_json(read_text_file(dir / "scenario.json")).name == "tiny");
}
