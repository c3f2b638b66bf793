#pragma once

#include <cstdint>

namespace nmsmc {

/// SplitMix64 output finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Deterministically derives a child seed from (seed, stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// Stream tags so that data, chains and filters never share a sequence.
namespace streams {
inline constexpr std::uint64_t kSimulate = 0x51u;
inline constexpr std::uint64_t kPrbs = 0x52u;
inline constexpr std::uint64_t kFilter = 0x53u;
inline constexpr std::uint64_t kPmmh = 0x54u;
inline constexpr std::uint64_t kSelect = 0x55u;
}  // namespace streams

/// Counter-based generator: the i-th output is mix64(key + i * golden_gamma).
///
/// Uniform and Gaussian transforms are written out here rather than taken from
/// <random> so that streams are bit-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() noexcept;
  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() noexcept;

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace nmsmc
