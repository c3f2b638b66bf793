#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "nmsmc/errors.hpp"
#include "nmsmc/fom.hpp"
#include "nmsmc/rng.hpp"
#include "oracles.hpp"

using namespace nmsmc;

namespace {

constexpr double kTs = 5e-4;

// Z by explicit polar form: (j w)^a = w^a (cos(a pi / 2) + j sin(a pi / 2)).
std::complex<double> polar_impedance(const BatteryTheta& t, double w) {
  auto cpe = [w](double a) {
    return std::complex<double>(std::pow(w, a) * std::cos(a * std::numbers::pi / 2),
                                std::pow(w, a) * std::sin(a * std::numbers::pi / 2));
  };
  return t.r_inf + t.r1 / (1.0 + t.r1 * t.c1 * cpe(t.alpha1)) + 1.0 / (t.c2 * cpe(t.alpha2));
}

}  // namespace

TEST_CASE("binom_frac examples") {
  CHECK(binom_frac(0.8, 1) == 0.8);
  CHECK(binom_frac(0.5, 2) == doctest::Approx(-0.125).epsilon(1e-15));
  CHECK(binom_frac(0.8, 0) == 1.0);
}

TEST_CASE("binom_frac matches the gamma form on random (alpha, j)") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const double alpha = 0.01 + 0.98 * rng.uniform();
    const auto j = static_cast<unsigned>(rng.next_u64() % 51);
    const double ref = oracle::binom_gamma(alpha, j);
    CHECK(std::abs(binom_frac(alpha, j) - ref) <= 1e-10 * std::abs(ref));
  }
}

TEST_CASE("build_model at the reference parameters") {
  const FoModel m = build_model(reference_theta(), kTs, 10, 0.002, 0.02);
  // 30-digit evaluation of alpha1 - ts^alpha1 / (R1 C1).
  CHECK(m.coeff(0, 0) == doctest::Approx(0.7961891245672722804).epsilon(1e-14));
  CHECK(m.coeff(1, 0) == 0.5);
  CHECK(m.coeff(0, 1) == doctest::Approx(0.08).epsilon(1e-14));
  CHECK(m.input_gain()[0] == doctest::Approx(7.621750865455439e-4).epsilon(1e-13));
  CHECK(m.input_gain()[1] == doctest::Approx(5.590169943749474e-5).epsilon(1e-13));
  CHECK(m.feedthrough() == 0.01);
  CHECK(m.output_row()[0] == 1.0);
  CHECK(m.output_row()[1] == 1.0);
  CHECK(m.has_battery_shape());
  CHECK(m.lag_major_coefficients().size() == 2 * 11);
}

TEST_CASE("coefficient signs and magnitudes for j >= 1") {
  for (double alpha : {0.1, 0.4, 0.5, 0.8, 0.95}) {
    BatteryTheta t = reference_theta();
    t.alpha1 = alpha;
    const FoModel m = build_model(t, kTs, 200, 0.0, 1.0);
    for (std::size_t j = 1; j <= 200; ++j) {
      CHECK(m.coeff(0, j) > 0.0);
      CHECK(m.coeff(0, j) == doctest::Approx(std::pow(-1.0, j) * binom_frac(alpha, j + 1)).epsilon(1e-14));
      if (j > 1) CHECK(m.coeff(0, j) < m.coeff(0, j - 1));
    }
  }
}

TEST_CASE("build_model rejects bad inputs") {
  CHECK_THROWS_AS(build_model(reference_theta(), 0.0, 10, 0.0, 1.0), ConfigError);
  CHECK_THROWS_AS(build_model(reference_theta(), -1.0, 10, 0.0, 1.0), ConfigError);
  CHECK_THROWS_AS(build_model(reference_theta(), kTs, 0, 0.0, 1.0), ConfigError);
  BatteryTheta bad = reference_theta();
  bad.alpha1 = 1.0;
  CHECK_THROWS_AS(build_model(bad, kTs, 10, 0.0, 1.0), ConfigError);
  bad = reference_theta();
  bad.c2 = -1.0;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("C2"), ConfigError);
}

TEST_CASE("step_mean examples") {
  SUBCASE("scalar two-term sum") {
    const FoModel m(1.0, 1, {{2.0, 3.0}}, {0.0}, {1.0}, 0.0, 0.0, 1.0);
    CHECK(step_mean(m, {{1.0}, {4.0}}, 0.0)[0] == 11.0);
  }
  SUBCASE("empty history returns b u") {
    const FoModel m = build_model(reference_theta(), kTs, 5, 0.0, 1.0);
    const auto x1 = step_mean(m, {{0.0, 0.0}}, 1.0);
    CHECK(x1[0] == m.input_gain()[0]);
    CHECK(x1[1] == m.input_gain()[1]);
  }
  SUBCASE("random path equals the dense sum") {
    const FoModel m = build_model(reference_theta(), kTs, 10, 0.0, 1.0);
    Rng rng(3);
    std::vector<std::vector<double>> path;
    for (int t = 0; t < 5; ++t) path.push_back({rng.normal(), rng.normal()});
    const auto got = step_mean(m, path, 0.7);
    const auto ref = oracle::dense_step_mean(m, path, 0.7);
    CHECK(got[0] == doctest::Approx(ref[0]).epsilon(1e-14));
    CHECK(got[1] == doctest::Approx(ref[1]).epsilon(1e-14));
  }
  SUBCASE("path too long") {
    const FoModel m(1.0, 1, {{2.0, 3.0}}, {0.0}, {1.0}, 0.0, 0.0, 1.0);
    CHECK_THROWS_AS(step_mean(m, {{1.0}, {4.0}, {5.0}}, 0.0), ConfigError);
  }
}

TEST_CASE("simulate examples and noise-free replay") {
  const std::size_t horizon = 50;
  SUBCASE("zero input, zero noise") {
    const FoModel m = build_model(reference_theta(), kTs, horizon, 0.0, 0.0);
    const Dataset d = simulate(m, std::vector<double>(horizon + 1, 0.0), 1);
    for (double y : d.y) CHECK(y == 0.0);
  }
  SUBCASE("unit step, first output is the feedthrough") {
    const FoModel m = build_model(reference_theta(), kTs, horizon, 0.0, 0.0);
    const Dataset d = simulate(m, std::vector<double>(horizon + 1, 1.0), 1);
    CHECK(d.y[0] == doctest::Approx(0.01).epsilon(1e-12));
  }
  SUBCASE("sigma_x = 0 matches iterated step_mean bitwise") {
    const FoModel m = build_model(reference_theta(), kTs, horizon, 0.0, 0.0);
    const auto u = gen_prbs(horizon + 1, 1.0, kTs, 9);
    const Dataset d = simulate(m, u, 4);
    std::vector<std::vector<double>> path{{0.0, 0.0}};
    for (std::size_t k = 0; k <= horizon; ++k) {
      CHECK(d.y[k] == m.output_mean(path[k], u[k]));
      if (k < horizon) path.push_back(step_mean(m, path, u[k]));
    }
  }
  SUBCASE("length mismatch") {
    const FoModel m = build_model(reference_theta(), kTs, horizon, 0.0, 1.0);
    CHECK_THROWS_AS(simulate(m, std::vector<double>(horizon, 0.0), 1), ConfigError);
  }
  SUBCASE("deterministic given the seed, sensitive to it") {
    const FoModel m = build_model(reference_theta(), kTs, horizon, 0.002, 0.02);
    const auto u = gen_prbs(horizon + 1, 1.0, kTs, 1);
    CHECK(simulate(m, u, 5).y == simulate(m, u, 5).y);
    CHECK(simulate(m, u, 5).y != simulate(m, u, 6).y);
  }
}

TEST_CASE("reference dataset has output of plausible magnitude") {
  const std::size_t horizon = 930;
  const FoModel m = build_model(reference_theta(), kTs, horizon, 0.002, 0.02);
  const Dataset d = simulate(m, gen_prbs(horizon + 1, 1.0, kTs, 1), 1);
  const auto [lo, hi] = std::minmax_element(d.y.begin(), d.y.end());
  // Order-of-magnitude check: tenths of a volt, not millivolts or volts.
  CHECK(*hi - *lo > 0.05);
  CHECK(*hi - *lo < 2.0);
}

TEST_CASE("gen_prbs") {
  const auto a = gen_prbs(4, 1.0, kTs, 11);
  for (double v : a) CHECK((v == 1.0 || v == -1.0));
  for (double v : gen_prbs(100, 5.0, kTs, 11)) CHECK((v == 5.0 || v == -5.0));
  CHECK(gen_prbs(200, 1.0, kTs, 3) == gen_prbs(200, 1.0, kTs, 3));

  // Maximal length: period 1023 with 512 ones and 511 zeros per period.
  const auto p = gen_prbs(2046, 1.0, kTs, 17);
  for (std::size_t i = 0; i < 1023; ++i) CHECK(p[i] == p[i + 1023]);
  double sum = 0.0;
  for (std::size_t i = 0; i < 1023; ++i) sum += p[i];
  CHECK(sum == 1.0);
  CHECK(std::abs(sum) / 1023.0 < 0.1);
  for (std::size_t period = 1; period < 1023; ++period) {
    if (1023 % period != 0) continue;
    bool repeats = true;
    for (std::size_t i = 0; i + period < 1023 && repeats; ++i) repeats = p[i] == p[i + period];
    CHECK_FALSE(repeats);
  }
}

TEST_CASE("impedance") {
  const BatteryTheta t = reference_theta();
  SUBCASE("high-frequency limit is R_inf") {
    CHECK(std::abs(impedance(t, 1e12)) == doctest::Approx(0.01).epsilon(1e-3));
  }
  SUBCASE("2 kHz within 5% of R_inf and equal to the polar oracle") {
    const double w = 2 * std::numbers::pi * 2000;
    const auto z = impedance(t, w);
    CHECK(std::abs(std::abs(z) - 0.01) / 0.01 < 0.05);
    CHECK(std::abs(z - polar_impedance(t, w)) < 1e-15);
    // 30-digit reference value.
    CHECK(z.real() == doctest::Approx(0.01007003049962038).epsilon(1e-12));
    CHECK(z.imag() == doctest::Approx(-0.00018229548101859).epsilon(1e-10));
  }
  SUBCASE("Warburg element alone has phase -alpha2 * 90 degrees") {
    for (double a2 : {0.3, 0.5, 0.8}) {
      BatteryTheta w = t;
      w.r1 = 1e-300;
      w.r_inf = 1e-300;
      w.alpha2 = a2;
      for (double omega : {1e-3, 1.0, 1e4}) {
        const double phase = std::arg(impedance(w, omega)) * 180 / std::numbers::pi;
        CHECK(phase == doctest::Approx(-90.0 * a2).epsilon(1e-9));
      }
    }
  }
  SUBCASE("capacitive everywhere") {
    for (double lf = -6; lf <= 6; lf += 0.25) CHECK(impedance(t, std::pow(10.0, lf)).imag() < 0.0);
  }
}

TEST_CASE("is_commensurate") {
  CHECK(is_commensurate(std::vector<double>{0.5, 0.25}, 0.25, 1e-9));
  CHECK_FALSE(is_commensurate(std::vector<double>{0.8, 0.5}, 0.3, 1e-9));
  CHECK(is_commensurate(std::vector<double>{0.8, 0.5}, 0.1, 1e-9));
  CHECK_THROWS_AS(is_commensurate(std::vector<double>{}, 0.1, 1e-9), ConfigError);
  CHECK_THROWS_AS(is_commensurate(std::vector<double>{0.5}, 0.0, 1e-9), ConfigError);
}

TEST_CASE("Dataset validation") {
  Dataset d;
  d.u = {0.0};
  d.y = {0.0};
  CHECK_THROWS_AS(d.validate(), ConfigError);
  d.u = {0.0, 1.0};
  CHECK_THROWS_AS(d.validate(), ConfigError);
  d.y = {0.0, 1.0};
  CHECK_THROWS_AS(d.validate(), ConfigError);
  d.ts = 5e-4;
  CHECK_NOTHROW(d.validate());
  CHECK(d.horizon() == 1);
}
