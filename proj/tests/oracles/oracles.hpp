#pragma once

// Independent reference implementations used only by the test suites.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "nmsmc/fom.hpp"
#include "nmsmc/rng.hpp"
#include "nmsmc/smc.hpp"

namespace oracle {

/// Generalized binomial coefficient through the gamma function.
inline double binom_gamma(double alpha, unsigned j) {
  return std::tgamma(alpha + 1.0) / (std::tgamma(j + 1.0) * std::tgamma(alpha + 1.0 - j));
}

/// x_{k+1} mean by a dense double loop over the stored history.
inline std::vector<double> dense_step_mean(const nmsmc::FoModel& model,
                                           const std::vector<std::vector<double>>& path, double u) {
  const std::size_t n = model.state_dim();
  const std::size_t k = path.size() - 1;
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= k; ++j) out[i] += model.coeff(i, j) * path[k - j][i];
    out[i] += model.input_gain()[i] * u;
  }
  return out;
}

struct DenseRun {
  double log_likelihood = 0.0;
  /// paths[p][t] is the state of particle p at time t after the final step.
  std::vector<std::vector<std::vector<double>>> paths;
  /// phi[k-1][p]: predictive means computed before step k's proposals.
  std::vector<std::vector<std::vector<double>>> phi;
};

/// Particle filter that stores every particle's full path and copies whole
/// rows on resampling. Consumes the filter stream in the same order as
/// run_filter (resampling draw, then proposal draws, per step).
inline DenseRun dense_filter(const nmsmc::FoModel& model, const nmsmc::Dataset& data,
                             const nmsmc::FilterConfig& cfg, bool keep_phi = false) {
  const std::size_t count = cfg.n_particles;
  const std::size_t n = model.state_dim();
  const std::size_t horizon = data.horizon();
  const double sy2 = model.sigma_y() * model.sigma_y();
  nmsmc::Rng rng(cfg.seed, nmsmc::streams::kFilter);

  DenseRun run;
  run.paths.assign(count, std::vector<std::vector<double>>{std::vector<double>(n, 0.0)});
  std::vector<double> log_w(count);
  std::vector<double> w(count);

  auto fold = [&]() {
    double max = -INFINITY;
    for (double lw : log_w) max = std::max(max, lw);
    if (!std::isfinite(max)) {
      run.log_likelihood = -INFINITY;
      return false;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      w[i] = std::exp(log_w[i] - max);
      sum += w[i];
    }
    run.log_likelihood += max + std::log(sum / static_cast<double>(count));
    return true;
  };

  // x_0 = 0, so y_0 has mean d * u_0.
  std::fill(log_w.begin(), log_w.end(),
            nmsmc::log_normal_density(data.y[0], model.feedthrough() * data.u[0], sy2));
  if (!fold()) return run;

  for (std::size_t k = 1; k <= horizon; ++k) {
    const auto ancestors = cfg.resampling == nmsmc::Resampling::systematic
                               ? nmsmc::systematic_resample(w, rng.uniform())
                               : nmsmc::multinomial_resample(w, rng);
    std::vector<std::vector<double>> means(count);
    for (std::size_t p = 0; p < count; ++p) means[p] = dense_step_mean(model, run.paths[p], data.u[k - 1]);
    if (keep_phi) run.phi.push_back(means);

    std::vector<std::vector<std::vector<double>>> next(count);
    for (std::size_t p = 0; p < count; ++p) {
      const auto& mean = means[ancestors[p]];
      std::vector<double> x(n);
      if (cfg.proposal == nmsmc::Proposal::locally_optimal) {
        const auto step = nmsmc::locally_optimal_step(model, mean, model.feedthrough() * data.u[k],
                                                      data.y[k], rng);
        x = {step.state[0], step.state[1]};
        log_w[p] = step.log_weight;
      } else {
        double y_mean = model.feedthrough() * data.u[k];
        for (std::size_t i = 0; i < n; ++i) {
          x[i] = mean[i] + model.sigma_x() * rng.normal();
          y_mean += model.output_row()[i] * x[i];
        }
        log_w[p] = nmsmc::log_normal_density(data.y[k], y_mean, sy2);
      }
      next[p] = run.paths[ancestors[p]];
      next[p].push_back(std::move(x));
    }
    run.paths = std::move(next);
    if (!fold()) return run;
  }
  return run;
}

/// Exact log-likelihood of y_k = x_k + sy * eta_k, x_{k+1} = a x_k + sx * eps_k,
/// x_0 = 0, by the Kalman filter.
inline double kalman_ar1_loglik(double a, double sx, double sy, std::span<const double> y) {
  double mean = 0.0;
  double var = 0.0;
  double ll = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double s = var + sy * sy;
    const double r = y[k] - mean;
    ll += -0.5 * (std::log(2.0 * std::numbers::pi * s) + r * r / s);
    const double gain = var / s;
    const double post_mean = mean + gain * r;
    const double post_var = (1.0 - gain) * var;
    mean = a * post_mean;
    var = a * a * post_var + sx * sx;
  }
  return ll;
}

/// Textbook random-walk Metropolis on a scalar log-density.
template <typename LogDensity>
std::vector<double> metropolis(LogDensity log_density, double x0, double step, std::size_t iterations,
                               std::uint64_t seed) {
  nmsmc::Rng rng(seed, 0x99);
  std::vector<double> out;
  out.reserve(iterations);
  double x = x0;
  double lx = log_density(x);
  for (std::size_t t = 0; t < iterations; ++t) {
    const double cand = x + step * rng.normal();
    const double lc = log_density(cand);
    if (std::log(rng.uniform()) < lc - lx) {
      x = cand;
      lx = lc;
    }
    out.push_back(x);
  }
  return out;
}

/// Direct simulation of the accept/reject mimic with i.i.d. log-normal Z:
/// mean acceptance fraction over `runs` sequences of length `len`.
inline double lognormal_mimic_rate(double sigma, std::size_t len, std::size_t runs, std::uint64_t seed) {
  nmsmc::Rng rng(seed, 0x77);
  double total = 0.0;
  for (std::size_t r = 0; r < runs; ++r) {
    double current = sigma * rng.normal();
    std::size_t acc = 0;
    for (std::size_t j = 1; j < len; ++j) {
      const double cand = sigma * rng.normal();
      if (rng.uniform() < std::exp(std::min(0.0, cand - current))) {
        current = cand;
        ++acc;
      }
    }
    total += static_cast<double>(acc) / static_cast<double>(len - 1);
  }
  return total / static_cast<double>(runs);
}

/// Sample mean and its standard error.
struct MeanErr {
  double mean;
  double se;
};

inline MeanErr mean_stderr(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  const double var = ss / static_cast<double>(x.size() - 1);
  return {m, std::sqrt(var / static_cast<double>(x.size()))};
}

inline double sample_variance(std::span<const double> x) {
  return std::pow(mean_stderr(x).se, 2) * static_cast<double>(x.size());
}

/// Scalar AR(1) as a one-dimensional FoModel: only lag 0 is non-zero.
inline nmsmc::FoModel ar1_model(double a, double sx, double sy, std::size_t horizon) {
  std::vector<std::vector<double>> rows{std::vector<double>(horizon + 1, 0.0)};
  rows[0][0] = a;
  return nmsmc::FoModel(1.0, horizon, rows, {0.0}, {1.0}, 0.0, sx, sy);
}

}  // namespace oracle
