#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nmsmc/pmmh.hpp"

namespace nmsmc {

/// Silverman's rule 1.06 * sd * n^(-1/5).
double silverman_bandwidth(std::span<const double> samples);

/// Gaussian kernel density estimate evaluated at each grid point.
/// Needs at least two samples (one is enough with an explicit bandwidth);
/// bandwidth defaults to Silverman's rule.
std::vector<double> kde(std::span<const double> samples, std::span<const double> grid,
                        std::optional<double> bandwidth = std::nullopt);

/// Empirical quantile of sorted data with linear interpolation between order
/// statistics (position p * (n - 1)).
double quantile_sorted(std::span<const double> sorted, double p);

struct ParameterSummary {
  double mean = 0.0;
  double sd = 0.0;
  double q05 = 0.0;
  double q50 = 0.0;
  double q95 = 0.0;
};

struct PosteriorSummary {
  std::vector<std::string> names;
  std::vector<ParameterSummary> params;
  /// dim x dim, row-major. Pairs involving a constant coordinate are 0.
  std::vector<double> correlation;
  bool degenerate = false;
  /// Prior-posterior overlap per parameter; empty unless a prior was given.
  std::vector<double> overlap;
  std::size_t n_samples = 0;

  double corr(std::size_t i, std::size_t j) const { return correlation[i * names.size() + j]; }
};

/// Post-burn-in samples of one coordinate, pooled across chains. Each chain
/// drops its first floor(burn_in * M) iterations.
std::vector<double> pooled_samples(std::span<const Chain> chains, double burn_in,
                                   std::size_t param);

/// Moments, quantiles and Pearson correlations of the pooled post-burn-in
/// samples. When `prior` is given, also fills the overlap scores.
PosteriorSummary summarize(std::span<const Chain> chains, double burn_in,
                           const Prior* prior = nullptr,
                           const std::vector<std::string>& names = {});
PosteriorSummary summarize(const Chain& chain, double burn_in);

/// Overlap coefficient between the prior marginal of coordinate `param` and
/// a KDE of `samples`, integrated by the trapezoid rule on `grid_size` points
/// spanning the prior support. Computed as the integral of min(p, q), which
/// equals 1 - (1/2) * L1 for normalized densities and stays accurate when the
/// posterior is much narrower than the grid spacing.
double prior_posterior_overlap(const Prior& prior, std::size_t param,
                               std::span<const double> samples, std::size_t grid_size = 2048);

/// Evenly spaced grid over [lo, hi] with `points` entries.
std::vector<double> linspace(double lo, double hi, std::size_t points);

}  // namespace nmsmc
