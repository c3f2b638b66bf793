#include <benchmark/benchmark.h>

#include <vector>

#include "nmsmc/fom.hpp"
#include "nmsmc/pathtree.hpp"
#include "nmsmc/rng.hpp"
#include "nmsmc/smc.hpp"

namespace {

constexpr double kTs = 5e-4;

nmsmc::Dataset base_data(std::size_t horizon) {
  const auto model = nmsmc::build_model(nmsmc::reference_theta(), kTs, horizon, 0.002, 0.02);
  return nmsmc::simulate(model, nmsmc::gen_prbs(horizon + 1, 1.0, kTs, 1), 1);
}

// A genealogy grown by systematic resampling on random weights for k steps.
nmsmc::TrajectoryTree grown_tree(std::size_t n_particles, std::size_t k) {
  nmsmc::Rng rng(3);
  std::vector<double> states(2 * n_particles, 0.0);
  nmsmc::TrajectoryTree tree(2, states);
  std::vector<double> w(n_particles);
  for (std::size_t step = 1; step <= k; ++step) {
    for (auto& v : w) v = rng.uniform();
    const auto ancestors = nmsmc::systematic_resample(w, rng.uniform());
    for (auto& s : states) s = rng.normal();
    tree.insert_generation(ancestors, states);
  }
  return tree;
}

void BM_WeightedSumsTree(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto tree = grown_tree(n, k);
  const std::vector<double> coeff(2 * (k + 1), 0.5);
  const std::vector<double> offset{0.0, 0.0};
  std::vector<double> out(2 * n);
  for (auto _ : state) {
    tree.weighted_sums(coeff, offset, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.counters["nodes"] = static_cast<double>(tree.node_count());
}
BENCHMARK(BM_WeightedSumsTree)->Args({128, 100})->Args({128, 930})->Args({128, 1890})->Args({1024, 930});

// Same sums over fully materialized paths: N (k + 1) work per call.
void BM_WeightedSumsDense(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto tree = grown_tree(n, k);
  std::vector<std::vector<double>> paths(n);
  for (std::size_t p = 0; p < n; ++p) paths[p] = tree.extract_path(p);
  const std::vector<double> coeff(2 * (k + 1), 0.5);
  std::vector<double> out(2 * n);
  for (auto _ : state) {
    for (std::size_t p = 0; p < n; ++p) {
      double a = 0.0, b = 0.0;
      for (std::size_t t = 0; t <= k; ++t) {
        a += coeff[2 * (k - t)] * paths[p][2 * t];
        b += coeff[2 * (k - t) + 1] * paths[p][2 * t + 1];
      }
      out[2 * p] = a;
      out[2 * p + 1] = b;
    }
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_WeightedSumsDense)->Args({128, 100})->Args({128, 930})->Args({128, 1890})->Args({1024, 930});

void BM_RunFilter(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t horizon = 930;
  const auto model = nmsmc::build_model(nmsmc::reference_theta(), kTs, horizon, 0.002, 0.02);
  const auto data = base_data(horizon);
  nmsmc::FilterConfig cfg;
  cfg.n_particles = n;
  cfg.proposal = state.range(1) == 0 ? nmsmc::Proposal::bootstrap : nmsmc::Proposal::locally_optimal;
  for (auto _ : state) {
    ++cfg.seed;
    benchmark::DoNotOptimize(nmsmc::run_filter(model, data, cfg).log_likelihood);
  }
}
BENCHMARK(BM_RunFilter)->Args({16, 1})->Args({128, 0})->Args({128, 1})->Unit(benchmark::kMillisecond);

void BM_SystematicResample(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  nmsmc::Rng rng(5);
  std::vector<double> w(n);
  for (auto& v : w) v = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(nmsmc::systematic_resample(w, rng.uniform()));
}
BENCHMARK(BM_SystematicResample)->Arg(128)->Arg(4096);

}  // namespace

BENCHMARK_MAIN();
