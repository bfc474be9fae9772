#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "semitrans/estimator.hpp"
#include "semitrans/rng.hpp"
#include "semitrans/simulation.hpp"
#include "oracles.hpp"

using namespace semitrans;
using Catch::Matchers::WithinAbs;

namespace {

Dataset fixed_dataset(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = unif(rng);
    y[i] = std::exp(x(i, 0)) + 0.5 * gauss(rng);
  }
  return Dataset(x, y);
}

BandwidthVec fixed_bw(double h, double g) {
  BandwidthVec bw;
  bw.h = Eigen::VectorXd::Constant(1, h);
  bw.g = g;
  return bw;
}

} // namespace

TEST_CASE("profile_loglik equals the compositional brute-force oracle") {
  const Dataset data = fixed_dataset(30, 2024);
  const BandwidthVec bw = fixed_bw(0.2, 0.45);
  for (Variant v : {Variant::heteroscedastic, Variant::homoscedastic}) {
    EstimatorConfig cfg;
    cfg.variant = v;
    for (double theta : {-1.0, 0.0, 0.5, 1.0, 2.5}) {
      const double got = profile_loglik(data, theta, cfg, bw);
      const double want = oracles::profile_loglik(data, theta, cfg, bw);
      CHECK_THAT(got, WithinAbs(want, 1e-10));
    }
  }
}

TEST_CASE("identity transform has zero Jacobian contribution") {
  const Dataset data = fixed_dataset(25, 77);
  double jac = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) jac += std::log(yj_deriv_y(1.0, data.y[i]));
  CHECK(jac == 0.0);
}

TEST_CASE("density floor keeps the objective finite") {
  Dataset data = fixed_dataset(30, 5);
  data.y[0] = 1e6; // far-tail observation
  EstimatorConfig cfg;
  cfg.density_floor = 1e-12;
  const double value = profile_loglik(data, 1.0, cfg, fixed_bw(0.2, 0.3));
  CHECK(std::isfinite(value));
}

TEST_CASE("profile_loglik rejects theta outside the interval") {
  const Dataset data = fixed_dataset(30, 5);
  EstimatorConfig cfg;
  CHECK_THROWS_AS(profile_loglik(data, 9.0, cfg, fixed_bw(0.2, 0.3)), std::invalid_argument);
}

TEST_CASE("fit recovers the transform on reference data") {
  std::mt19937_64 rng(4242);
  const Dataset data = sim::gen_htm1(400, 0.5, rng);
  EstimatorConfig cfg;
  const auto model = fit(data, cfg);
  CHECK(model.theta_hat >= -0.3);
  CHECK(model.theta_hat <= 0.3);
}

TEST_CASE("fit recovers the identity on already-linear data") {
  double mean_theta = 0.0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    std::mt19937_64 rng(derive_seed(99, static_cast<std::uint64_t>(s)));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int n = 400;
    Eigen::MatrixXd x(n, 1);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = unif(rng);
      y[i] = 2.0 * x(i, 0) + gauss(rng); // Lambda_1 is the identity
    }
    EstimatorConfig cfg;
    mean_theta += fit(Dataset(x, y), cfg).theta_hat;
  }
  mean_theta /= seeds;
  CHECK(mean_theta >= 0.8);
  CHECK(mean_theta <= 1.2);
}

TEST_CASE("degenerate search interval returns its endpoint") {
  const Dataset data = fixed_dataset(60, 31);
  EstimatorConfig cfg;
  cfg.theta_lo = cfg.theta_hi = 1.0;
  const auto model = fit(data, cfg);
  CHECK(model.theta_hat == 1.0);

  // residuals match a direct composition at theta = 1
  const std::size_t n = static_cast<std::size_t>(data.n());
  std::vector<double> xs(n), zs(n), z2(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = data.x(static_cast<Eigen::Index>(i), 0);
    zs[i] = data.y[static_cast<Eigen::Index>(i)];
    z2[i] = zs[i] * zs[i];
  }
  const double h = model.bandwidths.h[0];
  double zbar = 0.0, zvar = 0.0;
  for (double z : zs) zbar += z;
  zbar /= static_cast<double>(n);
  for (double z : zs) zvar += (z - zbar) * (z - zbar);
  zvar /= static_cast<double>(n);
  const double floor = std::max(1e-4 * zvar, 1e-12);
  for (std::size_t i = 0; i < n; ++i) {
    const double m = oracles::locpoly_value(xs, zs, xs[i], cfg.degree, h, cfg.regression_kernel);
    const double s = oracles::locpoly_value(xs, z2, xs[i], cfg.degree, h, cfg.regression_kernel);
    const double sig = std::sqrt(std::max(s - m * m, floor));
    CHECK_THAT(model.residuals[static_cast<Eigen::Index>(i)],
               WithinAbs((zs[i] - m) / sig, 1e-9));
  }
}

TEST_CASE("profile objective prefers the true transform region") {
  const int seeds = 20;
  double at0 = 0.0, at2 = 0.0, atm2 = 0.0;
  EstimatorConfig cfg;
  for (int s = 0; s < seeds; ++s) {
    std::mt19937_64 rng(derive_seed(555, static_cast<std::uint64_t>(s)));
    const Dataset data = sim::gen_htm1(200, 0.75, rng);
    const BandwidthVec bw = detail::select_bandwidths(data, 1.0, cfg);
    at0 += profile_loglik(data, 0.0, cfg, bw);
    at2 += profile_loglik(data, 2.0, cfg, bw);
    atm2 += profile_loglik(data, -2.0, cfg, bw);
  }
  CHECK(at0 / seeds > at2 / seeds);
  CHECK(at0 / seeds > atm2 / seeds);
}

TEST_CASE("estimator MSE shrinks with the sample size") {
  const int reps = 30;
  double mse100 = 0.0, mse400 = 0.0;
  EstimatorConfig cfg;
  for (int r = 0; r < reps; ++r) {
    std::mt19937_64 rng100(derive_seed(808, static_cast<std::uint64_t>(r), 100));
    std::mt19937_64 rng400(derive_seed(808, static_cast<std::uint64_t>(r), 400));
    const double t100 = fit(sim::gen_htm1(100, 0.5, rng100), cfg).theta_hat;
    const double t400 = fit(sim::gen_htm1(400, 0.5, rng400), cfg).theta_hat;
    mse100 += t100 * t100;
    mse400 += t400 * t400;
  }
  CHECK(mse400 < mse100);
}

TEST_CASE("heteroscedastic residuals are roughly standardized") {
  std::mt19937_64 rng(616);
  const Dataset data = sim::gen_htm1(200, 0.5, rng);
  EstimatorConfig cfg;
  const auto model = fit(data, cfg);
  const double mean = model.residuals.mean();
  const double var =
      (model.residuals.array() - mean).square().sum() / static_cast<double>(model.residuals.size());
  CHECK(std::abs(mean) <= 0.15);
  CHECK(std::abs(var - 1.0) <= 0.3);
}

TEST_CASE("fit is deterministic") {
  const Dataset data = fixed_dataset(80, 991);
  EstimatorConfig cfg;
  const auto m1 = fit(data, cfg);
  const auto m2 = fit(data, cfg);
  CHECK(m1.theta_hat == m2.theta_hat);
  CHECK(m1.loglik == m2.loglik);
  CHECK(m1.residuals == m2.residuals);
  CHECK(m1.bandwidths.g == m2.bandwidths.g);
}

TEST_CASE("fit reports per-theta diagnostics when everything fails") {
  // a huge response overflows the transform at every theta in [3, 4]
  Dataset data = fixed_dataset(12, 3);
  data.y[4] = 1e100;
  EstimatorConfig cfg;
  cfg.theta_lo = 3.0;
  cfg.theta_hi = 4.0;
  cfg.fixed_bandwidths = fixed_bw(0.3, 0.3);
  CHECK_THROWS_WITH(fit(data, cfg), Catch::Matchers::ContainsSubstring("theta"));
}

TEST_CASE("fit rejects tiny samples") {
  const Dataset data = fixed_dataset(9, 3);
  EstimatorConfig cfg;
  CHECK_THROWS_AS(fit(data, cfg), std::invalid_argument);
}

TEST_CASE("empirical_error_cdf is a right-continuous step function") {
  const Dataset data = fixed_dataset(40, 15);
  EstimatorConfig cfg;
  auto model = fit(data, cfg);
  model.residuals = Eigen::VectorXd(3);
  model.residuals << -1.0, 0.0, 2.0;
  model.sorted_residuals = model.residuals;

  CHECK(empirical_error_cdf(model, -1.5) == 0.0);
  CHECK(empirical_error_cdf(model, 2.0) == 1.0);
  CHECK(empirical_error_cdf(model, 5.0) == 1.0);
  CHECK_THAT(empirical_error_cdf(model, 0.0), WithinAbs(2.0 / 3.0, 1e-15));
  CHECK_THAT(empirical_error_cdf(model, -1.0), WithinAbs(1.0 / 3.0, 1e-15));
}
