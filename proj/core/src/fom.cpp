#include "nmsmc/fom.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "nmsmc/errors.hpp"
#include "nmsmc/rng.hpp"

namespace nmsmc {

BatteryTheta BatteryTheta::from_array(std::span<const double> v) {
  if (v.size() != kSize) {
    throw ConfigError("BatteryTheta needs 6 values, got " + std::to_string(v.size()));
  }
  return BatteryTheta{v[0], v[1], v[2], v[3], v[4], v[5]};
}

bool BatteryTheta::is_valid() const noexcept {
  for (double x : to_array()) {
    if (!(x > 0.0) || !std::isfinite(x)) return false;
  }
  return alpha1 < 1.0 && alpha2 < 1.0;
}

void BatteryTheta::validate() const {
  const auto values = to_array();
  for (std::size_t i = 0; i < kSize; ++i) {
    if (!(values[i] > 0.0) || !std::isfinite(values[i])) {
      throw ConfigError("theta." + std::string(kThetaNames[i]) + " must be positive and finite");
    }
  }
  if (alpha1 >= 1.0) throw ConfigError("theta.alpha1 must lie in (0, 1)");
  if (alpha2 >= 1.0) throw ConfigError("theta.alpha2 must lie in (0, 1)");
}

BatteryTheta reference_theta() noexcept {
  return BatteryTheta{0.01, 0.2, 3.0, 400.0, 0.8, 0.5};
}

double binom_frac(double alpha, std::size_t j) noexcept {
  double c = 1.0;
  for (std::size_t i = 1; i <= j; ++i) {
    c *= (alpha - static_cast<double>(i - 1)) / static_cast<double>(i);
  }
  return c;
}

FoModel::FoModel(double ts, std::size_t horizon, const std::vector<std::vector<double>>& coeff_rows,
                 std::vector<double> b, std::vector<double> m, double d, double sigma_x,
                 double sigma_y)
    : n_(coeff_rows.size()),
      horizon_(horizon),
      ts_(ts),
      b_(std::move(b)),
      m_(std::move(m)),
      d_(d),
      sigma_x_(sigma_x),
      sigma_y_(sigma_y) {
  if (!(ts > 0.0)) throw ConfigError("ts must be positive");
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
  if (n_ == 0) throw ConfigError("model needs at least one state dimension");
  if (b_.size() != n_ || m_.size() != n_) {
    throw ConfigError("input gain and output row must match the state dimension");
  }
  if (!(sigma_x >= 0.0)) throw ConfigError("sigma_x must be non-negative");
  if (!(sigma_y >= 0.0)) throw ConfigError("sigma_y must be non-negative");
  coeff_.assign(n_ * (horizon + 1), 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    if (coeff_rows[i].size() != horizon + 1) {
      throw ConfigError("coefficient row " + std::to_string(i) + " must have horizon + 1 entries");
    }
    for (std::size_t j = 0; j <= horizon; ++j) coeff_[j * n_ + i] = coeff_rows[i][j];
  }
}

double FoModel::output_mean(std::span<const double> state, double u) const noexcept {
  double y = d_ * u;
  for (std::size_t i = 0; i < n_; ++i) y += m_[i] * state[i];
  return y;
}

bool FoModel::has_battery_shape() const noexcept {
  return n_ == 2 && m_[0] == 1.0 && m_[1] == 1.0;
}

FoModel build_model(const BatteryTheta& theta, double ts, std::size_t horizon, double sigma_x,
                    double sigma_y) {
  theta.validate();
  if (!(ts > 0.0)) throw ConfigError("ts must be positive");
  if (horizon < 1) throw ConfigError("horizon must be at least 1");

  const std::array<double, 2> alpha{theta.alpha1, theta.alpha2};
  const std::array<double, 2> ts_pow{std::pow(ts, theta.alpha1), std::pow(ts, theta.alpha2)};

  std::vector<std::vector<double>> rows(2, std::vector<double>(horizon + 1));
  for (std::size_t i = 0; i < 2; ++i) {
    // (-1)^j C(a, j+1) via the running product, one multiply per lag.
    double c = alpha[i];  // C(a, 1)
    for (std::size_t j = 1; j <= horizon; ++j) {
      c *= (alpha[i] - static_cast<double>(j)) / static_cast<double>(j + 1);
      rows[i][j] = (j % 2 == 0) ? c : -c;
    }
  }
  rows[0][0] = alpha[0] - ts_pow[0] / (theta.r1 * theta.c1);
  rows[1][0] = alpha[1];  // open-circuit R2

  return FoModel(ts, horizon, rows, {ts_pow[0] / theta.c1, ts_pow[1] / theta.c2}, {1.0, 1.0},
                 theta.r_inf, sigma_x, sigma_y);
}

std::vector<double> step_mean(const FoModel& model, const std::vector<std::vector<double>>& path,
                              double u_k) {
  const std::size_t n = model.state_dim();
  if (path.empty()) throw ConfigError("step_mean needs at least x_0");
  if (path.size() > model.horizon() + 1) {
    throw ConfigError("path longer than the model horizon");
  }
  const std::size_t k = path.size() - 1;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = model.input_gain()[i] * u_k;
  for (std::size_t j = 0; j <= k; ++j) {
    const auto& x = path[k - j];
    if (x.size() != n) throw ConfigError("path state has wrong dimension");
    for (std::size_t i = 0; i < n; ++i) out[i] += model.coeff(i, j) * x[i];
  }
  return out;
}

void Dataset::validate() const {
  if (u.size() != y.size()) throw ConfigError("dataset u and y lengths differ");
  if (u.size() < 2) throw ConfigError("dataset needs at least two samples");
  if (!(ts > 0.0)) throw ConfigError("dataset ts must be positive");
}

Dataset simulate(const FoModel& model, std::span<const double> u, std::uint64_t seed) {
  const std::size_t horizon = model.horizon();
  if (u.size() != horizon + 1) {
    throw ConfigError("input length " + std::to_string(u.size()) + " != horizon + 1 (" +
                      std::to_string(horizon + 1) + ")");
  }
  const std::size_t n = model.state_dim();
  Rng rng(seed, streams::kSimulate);

  std::vector<std::vector<double>> path{std::vector<double>(n, 0.0)};
  path.reserve(horizon + 1);
  Dataset data;
  data.u.assign(u.begin(), u.end());
  data.y.resize(horizon + 1);
  data.ts = model.ts();
  data.seed = seed;
  data.sigma_x = model.sigma_x();
  data.sigma_y = model.sigma_y();

  for (std::size_t k = 0; k <= horizon; ++k) {
    data.y[k] = model.output_mean(path[k], u[k]) + model.sigma_y() * rng.normal();
    if (k == horizon) break;
    auto next = step_mean(model, path, u[k]);
    for (double& v : next) v += model.sigma_x() * rng.normal();
    path.push_back(std::move(next));
  }
  return data;
}

std::vector<double> gen_prbs(std::size_t length, double magnitude, double /*ts*/,
                             std::uint64_t seed) {
  constexpr std::uint32_t kPeriod = 1023;
  std::uint32_t reg = static_cast<std::uint32_t>(derive_seed(seed, streams::kPrbs) % kPeriod) + 1;
  std::vector<double> out(length);
  for (std::size_t k = 0; k < length; ++k) {
    const std::uint32_t bit = reg & 1u;
    out[k] = bit ? magnitude : -magnitude;
    // Feedback from stages 10 and 7 (bits 0 and 3 in right-shift form).
    const std::uint32_t fb = (reg ^ (reg >> 3)) & 1u;
    reg = (reg >> 1) | (fb << 9);
  }
  return out;
}

std::complex<double> impedance(const BatteryTheta& theta, double omega) {
  const std::complex<double> jw(0.0, omega);
  const auto cpe1 = std::pow(jw, theta.alpha1);
  const auto cpe2 = std::pow(jw, theta.alpha2);
  return theta.r_inf + theta.r1 / (1.0 + theta.r1 * theta.c1 * cpe1) + 1.0 / (theta.c2 * cpe2);
}

bool is_commensurate(std::span<const double> orders, double base, double tol) {
  if (orders.empty() || !(base > 0.0) || !(tol >= 0.0)) {
    throw ConfigError("is_commensurate needs orders, base > 0 and tol >= 0");
  }
  for (double a : orders) {
    const double ratio = a / base;
    const double nearest = std::round(ratio);
    if (nearest < 1.0 || std::abs(ratio - nearest) > tol) return false;
  }
  return true;
}

}  // namespace nmsmc
