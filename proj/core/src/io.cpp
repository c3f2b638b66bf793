#include "nmsmc/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "nmsmc/errors.hpp"

namespace nmsmc {

namespace {

using nlohmann::json;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    if (!field.empty() && field.back() == '\r') field.pop_back();
    fields.push_back(field);
  }
  return fields;
}

double parse_number(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end == s.c_str() || *end != '\0') {
    throw IoError("cannot parse " + what + " value '" + s + "'");
  }
  return v;
}

json number_or_string(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void write_dataset_csv(std::ostream& os, const Dataset& data) {
  os << "k,u,y\n";
  for (std::size_t k = 0; k < data.u.size(); ++k) {
    os << k << ',' << format_double(data.u[k]) << ',' << format_double(data.y[k]) << '\n';
  }
}

std::string dataset_metadata_json(const Dataset& data) {
  json meta;
  meta["ts"] = data.ts;
  meta["seed"] = data.seed;
  meta["sigma_x"] = data.sigma_x;
  meta["sigma_y"] = data.sigma_y;
  meta["theta_true"] = data.theta_true ? json::parse(theta_json(*data.theta_true)) : json(nullptr);
  return meta.dump(2) + "\n";
}

void save_dataset(const std::filesystem::path& csv_path, const Dataset& data) {
  std::ostringstream csv;
  write_dataset_csv(csv, data);
  write_text_file(csv_path, csv.str());
  auto sidecar = csv_path;
  sidecar.replace_extension(".json");
  write_text_file(sidecar, dataset_metadata_json(data));
}

Dataset parse_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("empty dataset file");
  const auto header = split_csv_line(line);
  if (header != std::vector<std::string>{"k", "u", "y"}) {
    throw IoError("dataset header must be k,u,y");
  }
  Dataset data;
  std::size_t expected = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 3) throw IoError("dataset row " + std::to_string(expected) + " needs 3 fields");
    if (static_cast<std::size_t>(parse_number(f[0], "k")) != expected) {
      throw IoError("dataset rows must be numbered 0, 1, 2, ...");
    }
    data.u.push_back(parse_number(f[1], "u"));
    data.y.push_back(parse_number(f[2], "y"));
    ++expected;
  }
  return data;
}

Dataset load_dataset(const std::filesystem::path& csv_path) {
  std::istringstream csv(read_text_file(csv_path));
  Dataset data = parse_dataset_csv(csv);
  auto sidecar = csv_path;
  sidecar.replace_extension(".json");
  if (std::filesystem::exists(sidecar)) {
    try {
      const json meta = json::parse(read_text_file(sidecar));
      data.ts = meta.at("ts").get<double>();
      data.seed = meta.value("seed", std::uint64_t{0});
      data.sigma_x = meta.value("sigma_x", 0.0);
      data.sigma_y = meta.value("sigma_y", 0.0);
      if (meta.contains("theta_true") && !meta["theta_true"].is_null()) {
        data.theta_true = parse_theta_json(meta["theta_true"].dump());
      }
    } catch (const json::exception& e) {
      throw IoError("bad dataset sidecar " + sidecar.string() + ": " + e.what());
    }
  }
  return data;
}

void write_chain_csv(std::ostream& os, const Chain& chain, std::span<const std::string_view> names) {
  if (names.size() != chain.dim) throw ConfigError("need one column name per parameter");
  os << "iter";
  for (auto n : names) os << ',' << n;
  os << ",loglik,accepted\n";
  for (std::size_t t = 0; t < chain.size(); ++t) {
    os << (t + 1);
    for (double v : chain.sample(t)) os << ',' << format_double(v);
    os << ',' << format_double(chain.loglik[t]) << ',' << static_cast<int>(chain.accepted[t]) << '\n';
  }
}

Chain parse_chain_csv(std::istream& is, std::vector<std::string>* names) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("empty chain file");
  const auto header = split_csv_line(line);
  if (header.size() < 4 || header.front() != "iter" || header[header.size() - 2] != "loglik" ||
      header.back() != "accepted") {
    throw IoError("chain header must be iter,<params...>,loglik,accepted");
  }
  Chain chain;
  chain.dim = header.size() - 3;
  if (names) names->assign(header.begin() + 1, header.end() - 2);
  std::size_t accepted = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) {
      throw IoError("chain row " + std::to_string(chain.size() + 1) + " has wrong field count");
    }
    for (std::size_t i = 0; i < chain.dim; ++i) chain.samples.push_back(parse_number(f[i + 1], header[i + 1]));
    chain.loglik.push_back(parse_number(f[chain.dim + 1], "loglik"));
    const bool acc = parse_number(f.back(), "accepted") != 0.0;
    chain.accepted.push_back(acc ? 1 : 0);
    accepted += acc ? 1 : 0;
  }
  if (chain.size() > 0) {
    chain.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(chain.size());
  }
  return chain;
}

Chain load_chain(const std::filesystem::path& path, std::vector<std::string>* names) {
  std::istringstream is(read_text_file(path));
  return parse_chain_csv(is, names);
}

std::string tuning_meta_json(const Chain& chain) {
  const TuningMeta& m = chain.tuning;
  json j;
  j["tuned"] = m.tuned;
  j["iterations"] = chain.size();
  j["acceptance_rate"] = chain.acceptance_rate;
  j["initial"] = chain.initial;
  j["initial_loglik"] = number_or_string(chain.initial_loglik);
  if (m.tuned) {
    j["stage1"] = {{"iterations", m.stage1.iterations},
                   {"acceptance_rate", m.stage1.acceptance_rate},
                   {"discarded", m.stage1_discarded},
                   {"proposal_cov", matrix_json(m.stage1.proposal_cov)}};
    j["jitter"] = {{"applied", m.jitter_applied}, {"scale", m.jitter_scale}};
  }
  j["stage2"] = {{"iterations", m.stage2.iterations},
                 {"acceptance_rate", m.stage2.acceptance_rate},
                 {"proposal_cov", matrix_json(m.stage2.proposal_cov)}};
  return j.dump(2) + "\n";
}

std::string summary_json(const PosteriorSummary& summary, const std::string& scenario) {
  json j;
  if (!scenario.empty()) j["scenario"] = scenario;
  j["n_samples"] = summary.n_samples;
  j["degenerate"] = summary.degenerate;
  json params = json::object();
  for (std::size_t i = 0; i < summary.names.size(); ++i) {
    const auto& p = summary.params[i];
    json entry{{"mean", p.mean}, {"sd", p.sd}, {"q05", p.q05}, {"q50", p.q50}, {"q95", p.q95}};
    entry["overlap"] = i < summary.overlap.size() ? json(summary.overlap[i]) : json(nullptr);
    params[summary.names[i]] = std::move(entry);
  }
  j["parameters"] = std::move(params);
  j["names"] = summary.names;
  json corr = json::array();
  const std::size_t d = summary.names.size();
  for (std::size_t i = 0; i < d; ++i) {
    json row = json::array();
    for (std::size_t k = 0; k < d; ++k) row.push_back(summary.corr(i, k));
    corr.push_back(std::move(row));
  }
  j["correlation"] = std::move(corr);
  return j.dump(2) + "\n";
}

void write_kde_csv(std::ostream& os, std::span<const double> grid, std::span<const double> density) {
  os << "x,density\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    os << format_double(grid[i]) << ',' << format_double(density[i]) << '\n';
  }
}

void write_impedance_csv(std::ostream& os, const BatteryTheta& theta, double fmin, double fmax,
                         std::size_t points) {
  if (!(fmin > 0.0) || !(fmax > fmin)) throw ConfigError("need 0 < fmin < fmax");
  if (points < 2) throw ConfigError("need at least two frequency points");
  os << "f,re,im,mag,phase\n";
  const double lmin = std::log10(fmin);
  const double lmax = std::log10(fmax);
  for (std::size_t i = 0; i < points; ++i) {
    const double f = (i + 1 == points)
                         ? fmax
                         : std::pow(10.0, lmin + (lmax - lmin) * static_cast<double>(i) /
                                                  static_cast<double>(points - 1));
    const auto z = impedance(theta, 2.0 * std::numbers::pi * f);
    os << format_double(f) << ',' << format_double(z.real()) << ',' << format_double(z.imag()) << ','
       << format_double(std::abs(z)) << ',' << format_double(std::arg(z) * 180.0 / std::numbers::pi)
       << '\n';
  }
}

BatteryTheta parse_theta_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("theta is not valid JSON: ") + e.what());
  }
  std::vector<double> v;
  if (j.is_array()) {
    for (const auto& x : j) {
      if (!x.is_number()) throw ConfigError("theta array entries must be numbers");
      v.push_back(x.get<double>());
    }
  } else if (j.is_object()) {
    for (auto name : kThetaNames) {
      const std::string key(name);
      if (!j.contains(key) || !j[key].is_number()) throw ConfigError("theta." + key + " missing");
      v.push_back(j[key].get<double>());
    }
  } else {
    throw ConfigError("theta must be a JSON object or array");
  }
  return BatteryTheta::from_array(v);
}

BatteryTheta load_theta(const std::filesystem::path& path) {
  return parse_theta_json(read_text_file(path));
}

std::string theta_json(const BatteryTheta& theta) {
  json j = json::object();
  const auto values = theta.to_array();
  for (std::size_t i = 0; i < values.size(); ++i) j[std::string(kThetaNames[i])] = values[i];
  return j.dump();
}

std::string selection_report_json(const SelectionReport& report) {
  json j;
  j["candidates"] = report.candidates;
  j["thetas"] = report.thetas;
  j["rates"] = report.rates;
  j["mean_rates"] = report.mean_rates;
  j["chosen"] = report.chosen;
  j["threshold_met"] = report.threshold_met;
  return j.dump(2) + "\n";
}

}  // namespace nmsmc
