#include "nmsmc/smc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "nmsmc/errors.hpp"

namespace nmsmc {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

double log_normal_density(double x, double mean, double variance) noexcept {
  const double r = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + r * r / variance);
}

double log_mean_exp(std::span<const double> log_weights) noexcept {
  double max = kNegInf;
  for (double lw : log_weights) {
    if (lw > max) max = lw;  // NaN never compares greater
  }
  if (!std::isfinite(max)) return kNegInf;
  double sum = 0.0;
  for (double lw : log_weights) {
    if (lw > kNegInf) sum += std::exp(lw - max);
  }
  return max + std::log(sum / static_cast<double>(log_weights.size()));
}

std::vector<std::size_t> systematic_resample(std::span<const double> weights, double u) {
  const std::size_t n = weights.size();
  if (n == 0) throw ConfigError("systematic_resample needs at least one weight");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ConfigError("weights must be non-negative");
    total += w;
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw ConfigError("systematic_resample needs a positive finite weight sum");
  }

  std::vector<std::size_t> ancestors(n);
  // Cumulative weights in units of 1/N so that the stratum points u + k are
  // exact; ancestor k is the first j with cumulative_j > u + k.
  const double scale = static_cast<double>(n) / total;
  std::size_t j = 0;
  double cumulative = weights[0] * scale;
  for (std::size_t k = 0; k < n; ++k) {
    const double point = u + static_cast<double>(k);
    while ((cumulative <= point || weights[j] == 0.0) && j + 1 < n) {
      ++j;
      cumulative += weights[j] * scale;
    }
    ancestors[k] = j;
  }
  return ancestors;
}

std::vector<std::size_t> multinomial_resample(std::span<const double> weights, Rng& rng) {
  const std::size_t n = weights.size();
  if (n == 0) throw ConfigError("multinomial_resample needs at least one weight");
  std::vector<double> cumulative(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(weights[i] >= 0.0)) throw ConfigError("weights must be non-negative");
    total += weights[i];
    cumulative[i] = total;
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw ConfigError("multinomial_resample needs a positive finite weight sum");
  }
  std::vector<std::size_t> ancestors(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double target = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), n - 1);
    while (weights[j] == 0.0 && j > 0) --j;
    ancestors[i] = j;
  }
  return ancestors;
}

double ess(std::span<const double> weights) {
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double w : weights) {
    sum += w;
    sum_sq += w * w;
  }
  if (!(sum > 0.0)) throw ConfigError("ess needs at least one positive weight");
  return sum * sum / sum_sq;
}

double locally_optimal_gain(double sigma_x, double sigma_y) noexcept {
  const double sx2 = sigma_x * sigma_x;
  return sx2 / (2.0 * sx2 + sigma_y * sigma_y);
}

LocalStep locally_optimal_step(const FoModel& model, std::span<const double> phi, double c,
                               double y, Rng& rng) {
  if (!model.has_battery_shape()) {
    throw ConfigError("locally optimal proposal needs n = 2 and output row (1, 1)");
  }
  if (phi.size() != 2) throw ConfigError("phi must be a 2-vector");
  const double sx2 = model.sigma_x() * model.sigma_x();
  const double sy2 = model.sigma_y() * model.sigma_y();
  const double pred_var = 2.0 * sx2 + sy2;
  const double zeta = c + phi[0] + phi[1];
  const double gain = sx2 / pred_var;
  const double shift = gain * (y - zeta);

  // Covariance [[s - s^2/v, -s^2/v], [-s^2/v, s - s^2/v]] has eigenvector
  // (1, 1)/sqrt2 with eigenvalue s sy^2 / v and (1, -1)/sqrt2 with eigenvalue s.
  const double sum_sd = std::sqrt(sx2 * sy2 / pred_var);
  const double diff_sd = model.sigma_x();
  const double z_sum = rng.normal();
  const double z_diff = rng.normal();
  const double a = sum_sd * z_sum * (std::numbers::sqrt2 / 2.0);
  const double b = diff_sd * z_diff * (std::numbers::sqrt2 / 2.0);

  return LocalStep{{phi[0] + shift + a + b, phi[1] + shift + a - b},
                   log_normal_density(y, zeta, pred_var)};
}

FilterOutput run_filter(const FoModel& model, const Dataset& data, const FilterConfig& cfg) {
  data.validate();
  const std::size_t count = cfg.n_particles;
  const std::size_t n = model.state_dim();
  const std::size_t horizon = data.horizon();
  if (count == 0) throw ConfigError("n_particles must be at least 1");
  if (!(model.sigma_y() > 0.0)) throw ConfigError("filtering needs sigma_y > 0");
  if (model.horizon() != horizon) {
    throw ConfigError("model horizon " + std::to_string(model.horizon()) +
                      " does not match data horizon " + std::to_string(horizon));
  }
  const bool local = cfg.proposal == Proposal::locally_optimal;
  if (local && !model.has_battery_shape()) {
    throw ConfigError("locally optimal proposal needs the battery model shape");
  }

  Rng rng(cfg.seed, streams::kFilter);
  const auto coeff = model.lag_major_coefficients();
  const auto gain = model.input_gain();
  const double sy2 = model.sigma_y() * model.sigma_y();

  std::vector<double> states(count * n, 0.0);
  TrajectoryTree tree(n, states);

  std::vector<double> log_w(count);
  std::vector<double> w(count);
  std::vector<double> phi(count * n);
  std::vector<double> offset(n);

  double log_likelihood = 0.0;
  std::vector<double> ess_trace;
  std::vector<std::size_t> node_trace;
  std::vector<double> incr_trace;
  ess_trace.reserve(horizon + 1);
  node_trace.reserve(horizon + 1);
  incr_trace.reserve(horizon + 1);

  // Folds the step's weights into the estimate; false once all are zero.
  auto record_step = [&]() {
    const double incr = log_mean_exp(log_w);
    incr_trace.push_back(incr);
    node_trace.push_back(tree.node_count());
    if (incr == kNegInf) {
      log_likelihood = kNegInf;
      ess_trace.push_back(0.0);
      return false;
    }
    log_likelihood += incr;
    double max = kNegInf;
    for (double lw : log_w) max = std::max(max, lw);
    for (std::size_t i = 0; i < count; ++i) {
      w[i] = (log_w[i] > kNegInf) ? std::exp(log_w[i] - max) : 0.0;
    }
    ess_trace.push_back(ess(w));
    return true;
  };

  // Dirac initial law: x_0 = 0 for every particle, weighted by g_0(y_0 | 0).
  std::fill(log_w.begin(), log_w.end(),
            log_normal_density(data.y[0], model.output_mean(tree.leaf_state(0), data.u[0]), sy2));
  bool alive = record_step();

  for (std::size_t k = 1; alive && k <= horizon; ++k) {
    const auto ancestors = cfg.resampling == Resampling::systematic
                               ? systematic_resample(w, rng.uniform())
                               : multinomial_resample(w, rng);

    for (std::size_t i = 0; i < n; ++i) offset[i] = gain[i] * data.u[k - 1];
    tree.weighted_sums(coeff, offset, phi);

    const double y = data.y[k];
    const double u = data.u[k];
    for (std::size_t p = 0; p < count; ++p) {
      const std::span<const double> mean(phi.data() + ancestors[p] * n, n);
      double* x = states.data() + p * n;
      if (local) {
        const auto step = locally_optimal_step(model, mean, model.feedthrough() * u, y, rng);
        x[0] = step.state[0];
        x[1] = step.state[1];
        log_w[p] = step.log_weight;
      } else {
        for (std::size_t i = 0; i < n; ++i) x[i] = mean[i] + model.sigma_x() * rng.normal();
        log_w[p] = log_normal_density(y, model.output_mean({x, n}, u), sy2);
      }
    }
    tree.insert_generation(ancestors, states);
    alive = record_step();
  }

  return FilterOutput{log_likelihood, std::move(tree), std::move(ess_trace), std::move(node_trace),
                      std::move(incr_trace)};
}

void write_filter_trace(std::ostream& os, const FilterOutput& out) {
  os << "k,ess,node_count,log_incr\n";
  const auto old_prec = os.precision(17);
  for (std::size_t k = 0; k < out.log_increments.size(); ++k) {
    os << k << ',' << out.per_step_ess[k] << ',' << out.node_count_trace[k] << ','
       << out.log_increments[k] << '\n';
  }
  os.precision(old_prec);
}

}  // namespace nmsmc
