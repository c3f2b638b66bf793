#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace nmsmc {

/// Parameters of the R_inf - R1||CPE1 - CPE2 battery circuit.
///
/// The second CPE has its parallel resistor open-circuited (Warburg term), so
/// there is no R2 field.
struct BatteryTheta {
  double r_inf = 0.0;   // ohm
  double r1 = 0.0;      // ohm
  double c1 = 0.0;      // F cm^-2 s^(-alpha1)
  double c2 = 0.0;      // F cm^-2 s^(-alpha2)
  double alpha1 = 0.0;  // fractional order
  double alpha2 = 0.0;

  static constexpr std::size_t kSize = 6;

  std::array<double, kSize> to_array() const noexcept {
    return {r_inf, r1, c1, c2, alpha1, alpha2};
  }
  static BatteryTheta from_array(std::span<const double> v);

  /// All entries strictly positive and both orders in (0, 1).
  bool is_valid() const noexcept;
  /// Throws ConfigError naming the first offending field.
  void validate() const;

  friend bool operator==(const BatteryTheta&, const BatteryTheta&) = default;
};

/// Column names, in BatteryTheta::to_array order.
inline constexpr std::array<std::string_view, BatteryTheta::kSize> kThetaNames{
    "R_inf", "R1", "C1", "C2", "alpha1", "alpha2"};

/// Data-generating parameter set of the identifiability studies.
BatteryTheta reference_theta() noexcept;

/// Generalized binomial coefficient C(alpha, j) by the product recursion
/// C(alpha, 0) = 1, C(alpha, j) = C(alpha, j-1) * (alpha - j + 1) / j.
double binom_frac(double alpha, std::size_t j) noexcept;

/// Discrete-time linear fractional-order state-space model with diagonal
/// history matrices:
///
///   x_{k+1} = sum_{j=0}^{k} diag(a_{.,j}) x_{k-j} + b u_k + sigma_x eps_k
///   y_k     = m . x_k + d u_k + sigma_y eta_k
///
/// Coefficients are stored lag-major (all n dimensions of lag j contiguous)
/// so that a tree traversal touching one node reads one contiguous block.
/// Immutable after construction.
class FoModel {
 public:
  /// `coeff_rows[i][j]` is a_{i,j}; every row must have horizon + 1 entries.
  FoModel(double ts, std::size_t horizon, const std::vector<std::vector<double>>& coeff_rows,
          std::vector<double> b, std::vector<double> m, double d, double sigma_x,
          double sigma_y);

  std::size_t state_dim() const noexcept { return n_; }
  std::size_t horizon() const noexcept { return horizon_; }
  double ts() const noexcept { return ts_; }
  double sigma_x() const noexcept { return sigma_x_; }
  double sigma_y() const noexcept { return sigma_y_; }
  double feedthrough() const noexcept { return d_; }
  std::span<const double> input_gain() const noexcept { return b_; }
  std::span<const double> output_row() const noexcept { return m_; }

  double coeff(std::size_t dim, std::size_t lag) const { return coeff_[lag * n_ + dim]; }
  /// n * (horizon + 1) values, entry [lag * n + dim].
  std::span<const double> lag_major_coefficients() const noexcept { return coeff_; }

  /// m . x + d u
  double output_mean(std::span<const double> state, double u) const noexcept;

  /// True for the two-CPE battery shape: n = 2 and m = (1, 1).
  bool has_battery_shape() const noexcept;

 private:
  std::size_t n_;
  std::size_t horizon_;
  double ts_;
  std::vector<double> coeff_;
  std::vector<double> b_;
  std::vector<double> m_;
  double d_;
  double sigma_x_;
  double sigma_y_;
};

/// Battery instantiation with R2 = infinity:
/// a_{1,0} = alpha1 - ts^alpha1 / (R1 C1), a_{2,0} = alpha2,
/// a_{i,j} = (-1)^j C(alpha_i, j + 1) for j >= 1, b_i = ts^alpha_i / C_i,
/// m = (1, 1), d = R_inf.
FoModel build_model(const BatteryTheta& theta, double ts, std::size_t horizon,
                    double sigma_x, double sigma_y);

/// Noise-free one-step mean: sum_{j=0}^{k} diag(a_{.,j}) x_{k-j} + b u_k for
/// the path x_{0:k}. Path states are n-vectors in time order.
std::vector<double> step_mean(const FoModel& model, const std::vector<std::vector<double>>& path,
                              double u_k);

struct Dataset {
  std::vector<double> u;
  std::vector<double> y;
  double ts = 0.0;
  std::uint64_t seed = 0;
  std::optional<BatteryTheta> theta_true;
  double sigma_x = 0.0;
  double sigma_y = 0.0;

  /// T, the last time index (u.size() - 1).
  std::size_t horizon() const noexcept { return u.empty() ? 0 : u.size() - 1; }
  /// Throws ConfigError unless u and y have equal length >= 2.
  void validate() const;
};

/// Simulates the noisy model from x_0 = 0. For each k the observation noise
/// eta_k is drawn first, then (k < T) the n state-noise draws eps_k.
Dataset simulate(const FoModel& model, std::span<const double> u, std::uint64_t seed);

/// Pseudo-random binary sequence from a 10-bit Fibonacci LFSR with taps
/// [10, 7] (period 1023), one bit per sample, bit 1 -> +magnitude and
/// bit 0 -> -magnitude. The initial register is derived from `seed`.
/// `ts` is carried for interface symmetry and does not alter the samples.
std::vector<double> gen_prbs(std::size_t length, double magnitude, double ts, std::uint64_t seed);

/// Circuit impedance R_inf + R1 / (1 + R1 C1 (j w)^a1) + 1 / (C2 (j w)^a2).
std::complex<double> impedance(const BatteryTheta& theta, double omega);

/// True iff every order / base is within `tol` of a positive integer.
bool is_commensurate(std::span<const double> orders, double base, double tol);

}  // namespace nmsmc
