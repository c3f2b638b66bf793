#include "nmsmc/pmmh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "nmsmc/errors.hpp"
#include "nmsmc/parallel.hpp"

namespace nmsmc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Matrix S with S S^T = cov; Cholesky when possible, otherwise the
// eigen-decomposition square root with negative rounding clamped to zero.
Eigen::MatrixXd proposal_factor(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

void validate_cov(const Eigen::MatrixXd& cov, std::size_t dim) {
  if (static_cast<std::size_t>(cov.rows()) != dim || static_cast<std::size_t>(cov.cols()) != dim) {
    throw ConfigError("proposal covariance must be " + std::to_string(dim) + "x" +
                      std::to_string(dim));
  }
  if (!cov.allFinite()) throw ConfigError("proposal covariance has non-finite entries");
  const double scale = std::max(cov.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ConfigError("proposal covariance must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
    throw ConfigError("proposal covariance must be positive semidefinite");
  }
}

double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z * (std::numbers::sqrt2 / 2.0)); }

}  // namespace

std::string to_string(PriorKind kind) {
  return kind == PriorKind::uniform ? "uniform" : "truncated_gaussian";
}

PriorKind prior_kind_from_string(const std::string& name) {
  if (name == "uniform") return PriorKind::uniform;
  if (name == "truncated_gaussian" || name == "gaussian") return PriorKind::truncated_gaussian;
  throw ConfigError("unknown prior kind '" + name + "'");
}

double Prior::sd(std::size_t i) const {
  return kind == PriorKind::uniform ? range(i) / std::sqrt(12.0) : range(i) / 4.0;
}

bool Prior::in_support(std::span<const double> theta) const {
  if (theta.size() != dim()) return false;
  for (std::size_t i = 0; i < dim(); ++i) {
    if (!(theta[i] >= lo[i] && theta[i] <= hi[i])) return false;
  }
  return true;
}

double Prior::marginal_density(std::size_t i, double x) const {
  if (!(x >= lo[i] && x <= hi[i])) return 0.0;
  if (kind == PriorKind::uniform) return 1.0 / range(i);
  const double s = sd(i);
  const double mass = standard_normal_cdf((hi[i] - mean(i)) / s) -
                      standard_normal_cdf((lo[i] - mean(i)) / s);
  const double z = (x - mean(i)) / s;
  return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi) * mass);
}

std::vector<double> Prior::draw(Rng& rng) const {
  std::vector<double> theta(dim());
  for (std::size_t i = 0; i < dim(); ++i) {
    if (kind == PriorKind::uniform) {
      theta[i] = lo[i] + range(i) * rng.uniform();
    } else {
      double x;
      do {
        x = mean(i) + sd(i) * rng.normal();
      } while (!(x >= lo[i] && x <= hi[i]));
      theta[i] = x;
    }
  }
  return theta;
}

void Prior::validate() const {
  if (lo.empty() || lo.size() != hi.size()) throw ConfigError("prior bounds must be non-empty and of equal length");
  for (std::size_t i = 0; i < dim(); ++i) {
    if (!(lo[i] < hi[i])) throw ConfigError("prior needs lo < hi in coordinate " + std::to_string(i));
  }
}

Prior Prior::battery(PriorKind kind) {
  return Prior{kind,
               {0.005, 0.050, 1.00, 300.0, 0.40, 0.40},
               {0.10, 0.50, 5.00, 500.0, 1.00, 1.00}};
}

double prior_logdensity(const Prior& prior, std::span<const double> theta) {
  if (!prior.in_support(theta)) return kNegInf;
  double lp = 0.0;
  for (std::size_t i = 0; i < prior.dim(); ++i) {
    if (prior.kind == PriorKind::uniform) {
      lp -= std::log(prior.range(i));
    } else {
      const double z = (theta[i] - prior.mean(i)) / prior.sd(i);
      lp -= 0.5 * z * z;
    }
  }
  return lp;
}

ModelBuilder battery_model_builder(double ts, std::size_t horizon, double sigma_x, double sigma_y) {
  return [=](std::span<const double> theta) {
    return build_model(BatteryTheta::from_array(theta), ts, horizon, sigma_x, sigma_y);
  };
}

LogLikelihood particle_loglik(ModelBuilder builder, const Dataset& data, FilterConfig filter_cfg) {
  return [builder = std::move(builder), &data, filter_cfg](std::span<const double> theta,
                                                           std::uint64_t seed) {
    std::optional<FoModel> model;
    try {
      model.emplace(builder(theta));
    } catch (const ConfigError&) {
      return kNegInf;
    }
    FilterConfig cfg = filter_cfg;
    cfg.seed = seed;
    return run_filter(*model, data, cfg).log_likelihood;
  };
}

Chain pmmh_run(const Prior& prior, const LogLikelihood& loglik, const PmmhConfig& cfg) {
  prior.validate();
  const std::size_t dim = prior.dim();
  if (cfg.iterations == 0) throw ConfigError("iterations must be at least 1");
  validate_cov(cfg.proposal_cov, dim);
  const Eigen::MatrixXd factor = proposal_factor(cfg.proposal_cov);

  Rng rng(cfg.seed, streams::kPmmh);
  std::vector<double> current = cfg.init ? *cfg.init : prior.draw(rng);
  if (!prior.in_support(current)) throw ConfigError("initial parameter outside the prior support");
  double current_lp = prior_logdensity(prior, current);
  double current_ll = loglik(current, derive_seed(cfg.seed, 0));

  Chain chain;
  chain.dim = dim;
  chain.initial = current;
  chain.initial_loglik = current_ll;
  chain.samples.reserve(cfg.iterations * dim);
  chain.loglik.reserve(cfg.iterations);
  chain.accepted.reserve(cfg.iterations);

  Eigen::VectorXd z(static_cast<Eigen::Index>(dim));
  std::vector<double> candidate(dim);
  std::size_t n_accepted = 0;

  for (std::size_t t = 1; t <= cfg.iterations; ++t) {
    for (std::size_t i = 0; i < dim; ++i) z[static_cast<Eigen::Index>(i)] = rng.normal();
    const Eigen::VectorXd step = factor * z;
    for (std::size_t i = 0; i < dim; ++i) candidate[i] = current[i] + step[static_cast<Eigen::Index>(i)];

    bool accept = false;
    double candidate_ll = kNegInf;
    const double candidate_lp = prior_logdensity(prior, candidate);
    if (candidate_lp > kNegInf) {
      candidate_ll = loglik(candidate, derive_seed(cfg.seed, t));
      const double log_alpha = (candidate_lp + candidate_ll) - (current_lp + current_ll);
      if (std::isnan(log_alpha)) {
        // Both targets are zero; move only toward a positive estimate.
        accept = candidate_ll > kNegInf;
      } else {
        accept = std::log(rng.uniform()) < log_alpha;
      }
    }
    if (accept) {
      current = candidate;
      current_lp = candidate_lp;
      current_ll = candidate_ll;
      ++n_accepted;
    }
    chain.samples.insert(chain.samples.end(), current.begin(), current.end());
    chain.loglik.push_back(current_ll);
    chain.accepted.push_back(accept ? 1 : 0);
  }
  chain.acceptance_rate = static_cast<double>(n_accepted) / static_cast<double>(cfg.iterations);
  chain.tuning.stage2 = StageInfo{cfg.iterations, chain.acceptance_rate, cfg.proposal_cov};
  return chain;
}

Chain pmmh_run(const Prior& prior, const ModelBuilder& builder, const Dataset& data,
               const PmmhConfig& cfg) {
  return pmmh_run(prior, particle_loglik(builder, data, cfg.filter_cfg), cfg);
}

Eigen::MatrixXd prior_proposal_cov(const Prior& prior) {
  const auto dim = static_cast<Eigen::Index>(prior.dim());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double s = prior.sd(static_cast<std::size_t>(i));
    cov(i, i) = s * s;
  }
  return cov;
}

Eigen::MatrixXd chain_covariance(const Chain& chain, std::size_t first) {
  const std::size_t total = chain.size();
  if (first + 2 > total) throw ConfigError("covariance needs at least two retained samples");
  const std::size_t m = total - first;
  const auto dim = static_cast<Eigen::Index>(chain.dim);
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      rows(chain.samples.data() + first * chain.dim, static_cast<Eigen::Index>(m), dim);
  const Eigen::RowVectorXd mean = rows.colwise().mean();
  const Eigen::MatrixXd centered = rows.rowwise() - mean;
  return (centered.transpose() * centered) / static_cast<double>(m - 1);
}

Chain tune_and_run(const Prior& prior, const LogLikelihood& loglik, const PmmhConfig& cfg,
                   const TuningConfig& tuning) {
  prior.validate();
  if (tuning.stage1_discard + 2 > tuning.stage1_iterations) {
    throw ConfigError("pilot run must keep at least two samples after discarding");
  }
  if (!(tuning.jitter >= 0.0)) throw ConfigError("jitter must be non-negative");

  PmmhConfig pilot_cfg = cfg;
  pilot_cfg.iterations = tuning.stage1_iterations;
  pilot_cfg.proposal_cov = prior_proposal_cov(prior);
  pilot_cfg.seed = derive_seed(cfg.seed, 1);
  const Chain pilot = pmmh_run(prior, loglik, pilot_cfg);

  Eigen::MatrixXd tuned = chain_covariance(pilot, tuning.stage1_discard);
  for (std::size_t i = 0; i < prior.dim(); ++i) {
    const auto d = static_cast<Eigen::Index>(i);
    tuned(d, d) += tuning.jitter * prior.range(i) * prior.range(i);
  }
  tuned = 0.5 * (tuned + tuned.transpose());

  PmmhConfig final_cfg = cfg;
  final_cfg.proposal_cov = tuned;
  final_cfg.seed = derive_seed(cfg.seed, 2);
  const auto last = pilot.sample(pilot.size() - 1);
  final_cfg.init = std::vector<double>(last.begin(), last.end());
  Chain chain = pmmh_run(prior, loglik, final_cfg);

  chain.tuning.tuned = true;
  chain.tuning.stage1 = StageInfo{pilot_cfg.iterations, pilot.acceptance_rate, pilot_cfg.proposal_cov};
  chain.tuning.stage1_discarded = tuning.stage1_discard;
  chain.tuning.jitter_applied = tuning.jitter > 0.0;
  chain.tuning.jitter_scale = tuning.jitter;
  chain.tuning.stage2 = StageInfo{final_cfg.iterations, chain.acceptance_rate, tuned};
  return chain;
}

Chain tune_and_run(const Prior& prior, const ModelBuilder& builder, const Dataset& data,
                   const PmmhConfig& cfg, const TuningConfig& tuning) {
  return tune_and_run(prior, particle_loglik(builder, data, cfg.filter_cfg), cfg, tuning);
}

double conditional_acceptance_rate(std::span<const double> log_z, Rng& rng) {
  if (log_z.size() < 2) throw ConfigError("conditional acceptance needs at least two estimates");
  double current = log_z[0];
  std::size_t accepted = 0;
  for (std::size_t j = 1; j < log_z.size(); ++j) {
    const double log_alpha = log_z[j] - current;
    bool accept;
    if (std::isnan(log_alpha)) {
      accept = log_z[j] > kNegInf;
    } else {
      accept = std::log(rng.uniform()) < log_alpha;
    }
    if (accept) {
      current = log_z[j];
      ++accepted;
    }
  }
  return static_cast<double>(accepted) / static_cast<double>(log_z.size() - 1);
}

SelectionReport select_num_particles(const Prior& prior, const ModelBuilder& builder,
                                     const Dataset& data, const SelectionConfig& cfg) {
  prior.validate();
  if (cfg.candidates.empty()) throw ConfigError("candidate list is empty");
  if (cfg.n_reps < 2) throw ConfigError("n_reps must be at least 2");
  if (cfg.n_theta < 1) throw ConfigError("n_theta must be at least 1");
  for (std::size_t c : cfg.candidates) {
    if (c == 0) throw ConfigError("candidate particle counts must be positive");
  }

  SelectionReport report;
  report.candidates = cfg.candidates;
  Rng rng(cfg.seed, streams::kSelect);
  for (std::size_t t = 0; t < cfg.n_theta; ++t) report.thetas.push_back(prior.draw(rng));

  const std::size_t n_cand = cfg.candidates.size();
  report.rates.assign(n_cand, std::vector<double>(cfg.n_theta, 0.0));

  parallel_for(n_cand * cfg.n_theta, cfg.jobs, [&](std::size_t task) {
    const std::size_t c = task / cfg.n_theta;
    const std::size_t t = task % cfg.n_theta;
    const std::uint64_t task_seed = derive_seed(cfg.seed, task + 1);
    FilterConfig fcfg = cfg.filter_cfg;
    fcfg.n_particles = cfg.candidates[c];
    const LogLikelihood run = particle_loglik(builder, data, fcfg);
    std::vector<double> log_z(cfg.n_reps);
    for (std::size_t r = 0; r < cfg.n_reps; ++r) {
      log_z[r] = run(report.thetas[t], derive_seed(task_seed, r));
    }
    Rng mimic(task_seed, streams::kSelect);
    report.rates[c][t] = conditional_acceptance_rate(log_z, mimic);
  });

  report.mean_rates.resize(n_cand);
  for (std::size_t c = 0; c < n_cand; ++c) {
    double sum = 0.0;
    for (double r : report.rates[c]) sum += r;
    report.mean_rates[c] = sum / static_cast<double>(cfg.n_theta);
  }
  // Candidates are scanned in increasing N regardless of input order.
  std::vector<std::size_t> order(n_cand);
  for (std::size_t c = 0; c < n_cand; ++c) order[c] = c;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return cfg.candidates[a] < cfg.candidates[b]; });
  report.chosen = cfg.candidates[order.back()];
  for (std::size_t c : order) {
    if (report.mean_rates[c] >= cfg.threshold) {
      report.chosen = cfg.candidates[c];
      report.threshold_met = true;
      break;
    }
  }
  return report;
}

}  // namespace nmsmc
