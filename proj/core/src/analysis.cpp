#include "nmsmc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nmsmc/errors.hpp"

namespace nmsmc {

namespace {

struct Moments {
  double mean;
  double sd;
};

Moments moments(std::span<const double> x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double var = x.size() > 1 ? ss / static_cast<double>(x.size() - 1) : 0.0;
  return {mean, std::sqrt(var)};
}

}  // namespace

double silverman_bandwidth(std::span<const double> samples) {
  if (samples.size() < 2) throw ConfigError("bandwidth needs at least two samples");
  const double sd = moments(samples).sd;
  return 1.06 * sd * std::pow(static_cast<double>(samples.size()), -0.2);
}

std::vector<double> kde(std::span<const double> samples, std::span<const double> grid,
                        std::optional<double> bandwidth) {
  // A single sample is accepted only with an explicit bandwidth.
  if (samples.empty() || (samples.size() < 2 && !bandwidth)) {
    throw ConfigError("kde needs at least two samples");
  }
  const double h = bandwidth ? *bandwidth : silverman_bandwidth(samples);
  if (!(h > 0.0)) throw ConfigError("kde bandwidth must be positive (constant samples?)");

  const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  std::vector<double> density(grid.size(), 0.0);
  // Kernels beyond 8.5 bandwidths contribute below 1e-15 relative.
  constexpr double kCut = 8.5;
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double x = grid[g];
    auto first = std::lower_bound(sorted.begin(), sorted.end(), x - kCut * h);
    auto last = std::upper_bound(first, sorted.end(), x + kCut * h);
    double sum = 0.0;
    for (auto it = first; it != last; ++it) {
      const double z = (x - *it) / h;
      sum += std::exp(-0.5 * z * z);
    }
    density[g] = sum * norm;
  }
  return density;
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ConfigError("quantile of an empty sample");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<double> pooled_samples(std::span<const Chain> chains, double burn_in,
                                   std::size_t param) {
  if (!(burn_in >= 0.0 && burn_in < 1.0)) throw ConfigError("burn_in must lie in [0, 1)");
  std::vector<double> out;
  for (const Chain& chain : chains) {
    if (param >= chain.dim) throw ConfigError("parameter index out of range");
    const auto skip = static_cast<std::size_t>(std::floor(burn_in * static_cast<double>(chain.size())));
    for (std::size_t t = skip; t < chain.size(); ++t) out.push_back(chain.sample(t)[param]);
  }
  return out;
}

PosteriorSummary summarize(std::span<const Chain> chains, double burn_in, const Prior* prior,
                           const std::vector<std::string>& names) {
  if (chains.empty()) throw ConfigError("summarize needs at least one chain");
  const std::size_t dim = chains.front().dim;
  for (const Chain& c : chains) {
    if (c.dim != dim) throw ConfigError("chains have different dimensions");
  }
  if (prior && prior->dim() != dim) throw ConfigError("prior dimension does not match the chains");

  std::vector<std::vector<double>> columns(dim);
  for (std::size_t i = 0; i < dim; ++i) columns[i] = pooled_samples(chains, burn_in, i);
  const std::size_t m = columns.front().size();
  if (m == 0) throw ConfigError("no samples left after burn-in");

  PosteriorSummary summary;
  summary.n_samples = m;
  summary.names = names;
  if (summary.names.size() != dim) {
    summary.names.clear();
    for (std::size_t i = 0; i < dim; ++i) summary.names.push_back("theta" + std::to_string(i));
  }

  std::vector<Moments> mom(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    mom[i] = moments(columns[i]);
    std::vector<double> sorted = columns[i];
    std::sort(sorted.begin(), sorted.end());
    summary.params.push_back(ParameterSummary{mom[i].mean, mom[i].sd, quantile_sorted(sorted, 0.05),
                                              quantile_sorted(sorted, 0.50),
                                              quantile_sorted(sorted, 0.95)});
  }

  summary.correlation.assign(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) {
    summary.correlation[i * dim + i] = 1.0;
    for (std::size_t j = i + 1; j < dim; ++j) {
      double r = 0.0;
      if (mom[i].sd > 0.0 && mom[j].sd > 0.0 && m > 1) {
        double cross = 0.0;
        for (std::size_t t = 0; t < m; ++t) {
          cross += (columns[i][t] - mom[i].mean) * (columns[j][t] - mom[j].mean);
        }
        r = cross / static_cast<double>(m - 1) / (mom[i].sd * mom[j].sd);
        r = std::clamp(r, -1.0, 1.0);
      } else {
        summary.degenerate = true;
      }
      summary.correlation[i * dim + j] = r;
      summary.correlation[j * dim + i] = r;
    }
  }
  if (dim == 1 && mom[0].sd == 0.0) summary.degenerate = true;

  if (prior) {
    for (std::size_t i = 0; i < dim; ++i) {
      summary.overlap.push_back(prior_posterior_overlap(*prior, i, columns[i]));
    }
  }
  return summary;
}

PosteriorSummary summarize(const Chain& chain, double burn_in) {
  return summarize(std::span<const Chain>(&chain, 1), burn_in);
}

std::vector<double> linspace(double lo, double hi, std::size_t points) {
  if (points < 2) throw ConfigError("linspace needs at least two points");
  std::vector<double> grid(points);
  const double step = (hi - lo) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) grid[i] = lo + step * static_cast<double>(i);
  grid.back() = hi;
  return grid;
}

double prior_posterior_overlap(const Prior& prior, std::size_t param,
                               std::span<const double> samples, std::size_t grid_size) {
  if (param >= prior.dim()) throw ConfigError("parameter index out of range");
  if (samples.size() < 2) throw ConfigError("overlap needs at least two posterior samples");
  const auto grid = linspace(prior.lo[param], prior.hi[param], grid_size);

  std::vector<double> post;
  const double sd = moments(samples).sd;
  if (sd > 0.0) {
    post = kde(samples, grid);
  } else {
    // Point mass: no density anywhere on a finite grid.
    post.assign(grid.size(), 0.0);
  }
  const double dx = grid[1] - grid[0];
  double integral = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double weight = (g == 0 || g + 1 == grid.size()) ? 0.5 : 1.0;
    integral += weight * std::min(post[g], prior.marginal_density(param, grid[g]));
  }
  return std::clamp(integral * dx, 0.0, 1.0);
}

}  // namespace nmsmc
