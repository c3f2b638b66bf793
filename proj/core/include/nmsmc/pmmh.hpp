#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nmsmc/fom.hpp"
#include "nmsmc/rng.hpp"
#include "nmsmc/smc.hpp"

namespace nmsmc {

enum class PriorKind { uniform, truncated_gaussian };

std::string to_string(PriorKind kind);
PriorKind prior_kind_from_string(const std::string& name);

/// Product prior over a box. The truncated Gaussian is centred on the box
/// midpoint with sd = range / 4 and cut to the box; its density is kept
/// unnormalized where only ratios matter.
struct Prior {
  PriorKind kind = PriorKind::uniform;
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t dim() const noexcept { return lo.size(); }
  double range(std::size_t i) const { return hi[i] - lo[i]; }
  double mean(std::size_t i) const { return 0.5 * (lo[i] + hi[i]); }
  /// Standard deviation of the marginal: range / sqrt(12) for uniform,
  /// range / 4 (the untruncated scale) for truncated Gaussian.
  double sd(std::size_t i) const;

  bool in_support(std::span<const double> theta) const;
  /// Normalized marginal density of coordinate i (truncation constant included).
  double marginal_density(std::size_t i, double x) const;
  /// Independent draw; rejection against the box for the Gaussian kind.
  std::vector<double> draw(Rng& rng) const;

  /// Throws ConfigError unless lo < hi componentwise.
  void validate() const;

  /// Box of the battery parameter ranges, in BatteryTheta order.
  static Prior battery(PriorKind kind);
};

/// Uniform: -sum log(hi - lo) inside the box. Truncated Gaussian: unnormalized
/// Gaussian log-density inside. -inf outside either way.
double prior_logdensity(const Prior& prior, std::span<const double> theta);

/// Log-likelihood estimate for a parameter; `seed` selects the randomness.
using LogLikelihood = std::function<double(std::span<const double> theta, std::uint64_t seed)>;

using ModelBuilder = std::function<FoModel(std::span<const double> theta)>;

/// build_model for a fixed sample time, horizon and noise scales.
ModelBuilder battery_model_builder(double ts, std::size_t horizon, double sigma_x, double sigma_y);

/// Particle-filter likelihood: builds the model and runs run_filter with
/// filter_cfg, replacing its seed by the per-call seed. Parameters the
/// builder rejects score -inf.
LogLikelihood particle_loglik(ModelBuilder builder, const Dataset& data, FilterConfig filter_cfg);

struct PmmhConfig {
  std::size_t iterations = 2000;
  /// Random-walk covariance; symmetric positive semidefinite.
  Eigen::MatrixXd proposal_cov;
  FilterConfig filter_cfg;
  std::uint64_t seed = 0;
  /// Starting point; a prior draw when empty.
  std::optional<std::vector<double>> init;
};

struct StageInfo {
  std::size_t iterations = 0;
  double acceptance_rate = 0.0;
  Eigen::MatrixXd proposal_cov;
};

struct TuningMeta {
  bool tuned = false;
  StageInfo stage1;
  std::size_t stage1_discarded = 0;
  bool jitter_applied = false;
  double jitter_scale = 0.0;
  StageInfo stage2;
};

struct Chain {
  std::size_t dim = 0;
  /// iterations x dim, row-major.
  std::vector<double> samples;
  std::vector<double> loglik;
  std::vector<std::uint8_t> accepted;
  double acceptance_rate = 0.0;
  TuningMeta tuning;
  /// Starting state (before iteration 1) and its likelihood estimate.
  std::vector<double> initial;
  double initial_loglik = 0.0;

  std::size_t size() const noexcept { return loglik.size(); }
  std::span<const double> sample(std::size_t t) const {
    return std::span<const double>(samples).subspan(t * dim, dim);
  }
};

/// Particle marginal Metropolis-Hastings with a Gaussian random walk.
///
/// log alpha = [log p(th*) + log Z*] - [log p(th) + log Z]; candidates outside
/// the prior support are rejected without calling `loglik`. The likelihood of
/// iteration t (t = 0 for the start) is evaluated with seed
/// derive_seed(cfg.seed, t).
Chain pmmh_run(const Prior& prior, const LogLikelihood& loglik, const PmmhConfig& cfg);
Chain pmmh_run(const Prior& prior, const ModelBuilder& builder, const Dataset& data,
               const PmmhConfig& cfg);

/// Diagonal covariance with the prior marginal variances.
Eigen::MatrixXd prior_proposal_cov(const Prior& prior);

struct TuningConfig {
  std::size_t stage1_iterations = 5000;
  std::size_t stage1_discard = 2500;
  double jitter = 1e-10;
};

/// Two-stage run: a pilot with the prior-scale diagonal covariance, the
/// sample covariance of its retained tail (plus jitter * diag(range^2)), then
/// cfg.iterations from the pilot's last state with that covariance.
/// cfg.proposal_cov is ignored.
Chain tune_and_run(const Prior& prior, const LogLikelihood& loglik, const PmmhConfig& cfg,
                   const TuningConfig& tuning = {});
Chain tune_and_run(const Prior& prior, const ModelBuilder& builder, const Dataset& data,
                   const PmmhConfig& cfg, const TuningConfig& tuning = {});

/// Sample covariance (divisor m - 1) of rows [first, size) of a chain.
Eigen::MatrixXd chain_covariance(const Chain& chain, std::size_t first);

/// Accept/reject mimic over repeated estimates at one parameter: start from
/// Z_1 and accept Z_j with probability min(1, Z_j / Z_current). Returns the
/// fraction of the n - 1 proposals accepted. Inputs are log Z.
double conditional_acceptance_rate(std::span<const double> log_z, Rng& rng);

struct SelectionConfig {
  std::vector<std::size_t> candidates{16, 64, 128};
  std::size_t n_reps = 100;
  std::size_t n_theta = 3;
  double threshold = 0.10;
  std::uint64_t seed = 0;
  FilterConfig filter_cfg;
  std::size_t jobs = 1;
};

struct SelectionReport {
  std::vector<std::size_t> candidates;
  std::vector<std::vector<double>> thetas;
  /// rates[c][t]: acceptance for candidate c at parameter t.
  std::vector<std::vector<double>> rates;
  std::vector<double> mean_rates;
  std::size_t chosen = 0;
  bool threshold_met = false;
};

/// Smallest candidate N whose average conditional acceptance rate over a few
/// prior draws reaches the threshold; the largest candidate when none does.
SelectionReport select_num_particles(const Prior& prior, const ModelBuilder& builder,
                                     const Dataset& data, const SelectionConfig& cfg);

}  // namespace nmsmc
