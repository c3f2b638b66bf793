#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "nmsmc/fom.hpp"
#include "nmsmc/pathtree.hpp"
#include "nmsmc/rng.hpp"

namespace nmsmc {

enum class Proposal { bootstrap, locally_optimal };
enum class Resampling { systematic, multinomial };

struct FilterConfig {
  std::size_t n_particles = 128;
  Proposal proposal = Proposal::locally_optimal;
  Resampling resampling = Resampling::systematic;
  std::uint64_t seed = 0;
};

struct FilterOutput {
  /// Natural log of the likelihood estimate; -inf when every weight of some
  /// step underflowed.
  double log_likelihood = 0.0;
  TrajectoryTree final_tree;
  /// Per step k = 0..T (shorter if the run stopped at a zero-weight step).
  std::vector<double> per_step_ess;
  std::vector<std::size_t> node_count_trace;
  std::vector<double> log_increments;
};

/// Systematic resampling. `u` in [0, 1) is the single uniform draw.
/// Returns zero-based ancestor indices in non-decreasing order.
std::vector<std::size_t> systematic_resample(std::span<const double> weights, double u);

/// Multinomial resampling; consumes N uniforms from `rng`.
std::vector<std::size_t> multinomial_resample(std::span<const double> weights, Rng& rng);

/// Effective sample size (sum w)^2 / sum w^2.
double ess(std::span<const double> weights);

struct LocalStep {
  std::array<double, 2> state;
  double log_weight;
};

/// Locally optimal move for the battery shape (n = 2, y = x_1 + x_2 + c).
///
/// `phi` is the predictive mean of x_k given the path, `c` the deterministic
/// output offset (feedthrough times input). Draws two standard normals.
/// The log weight is log N(y; c + phi_1 + phi_2, 2 sx^2 + sy^2).
LocalStep locally_optimal_step(const FoModel& model, std::span<const double> phi, double c,
                               double y, Rng& rng);

/// Gain sx^2 / (2 sx^2 + sy^2) of the locally optimal proposal mean.
double locally_optimal_gain(double sigma_x, double sigma_y) noexcept;

/// Particle filter over the whole dataset with tree-backed path storage.
///
/// All particles start at x_0 = 0 and are weighted by g_0. Draw order per
/// step k >= 1: the resampling draw(s) picking ancestors from the weights of
/// step k - 1, then the proposal draws for particles 0..N-1.
FilterOutput run_filter(const FoModel& model, const Dataset& data, const FilterConfig& cfg);

/// CSV `k,ess,node_count,log_incr`, one row per processed step.
void write_filter_trace(std::ostream& os, const FilterOutput& out);

double log_normal_density(double x, double mean, double variance) noexcept;

/// log((1/N) sum exp(lw)), -inf when all entries are -inf.
double log_mean_exp(std::span<const double> log_weights) noexcept;

}  // namespace nmsmc
