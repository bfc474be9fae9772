#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <random>

#include "semitrans/bootstrap.hpp"
#include "semitrans/rng.hpp"
#include "semitrans/simulation.hpp"

using namespace semitrans;
using Catch::Matchers::WithinAbs;

TEST_CASE("standardize_residuals has exact moments") {
  Eigen::VectorXd eps(3);
  eps << 1.0, 2.0, 3.0;

  SECTION("heteroscedastic: centered and scaled (1/n variance)") {
    const Eigen::VectorXd out = standardize_residuals(eps, Variant::heteroscedastic);
    CHECK_THAT(out[0], WithinAbs(-std::sqrt(1.5), 1e-12));
    CHECK_THAT(out[1], WithinAbs(0.0, 1e-12));
    CHECK_THAT(out[2], WithinAbs(std::sqrt(1.5), 1e-12));
    CHECK_THAT(out.mean(), WithinAbs(0.0, 1e-12));
    CHECK_THAT(out.squaredNorm() / 3.0, WithinAbs(1.0, 1e-12));
  }

  SECTION("already standardized input is unchanged") {
    const Eigen::VectorXd std1 = standardize_residuals(eps, Variant::heteroscedastic);
    const Eigen::VectorXd std2 = standardize_residuals(std1, Variant::heteroscedastic);
    for (int i = 0; i < 3; ++i) CHECK_THAT(std2[i], WithinAbs(std1[i], 1e-12));
  }

  SECTION("homoscedastic: centering only") {
    const Eigen::VectorXd out = standardize_residuals(eps, Variant::homoscedastic);
    CHECK_THAT(out[0], WithinAbs(-1.0, 1e-15));
    CHECK_THAT(out[1], WithinAbs(0.0, 1e-15));
    CHECK_THAT(out[2], WithinAbs(1.0, 1e-15));
  }

  SECTION("degenerate residuals are rejected") {
    Eigen::VectorXd flat = Eigen::VectorXd::Constant(5, 3.3);
    CHECK_THROWS_AS(standardize_residuals(flat, Variant::heteroscedastic), std::invalid_argument);
    CHECK_THROWS_AS(standardize_residuals(Eigen::VectorXd::Ones(1), Variant::heteroscedastic),
                    std::invalid_argument);
  }
}

TEST_CASE("smooth bootstrap errors have the advertised conditional moments") {
  std::mt19937_64 data_rng(12);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd eps(200);
  for (int i = 0; i < 200; ++i) eps[i] = gauss(data_rng) + 0.5;
  const Eigen::VectorXd tilde = standardize_residuals(eps, Variant::heteroscedastic);

  const double a_n = 0.5 * std::pow(200.0, -0.25);
  std::mt19937_64 rng(34);
  const Eigen::VectorXd draws = smooth_bootstrap_errors(tilde, a_n, 100000, rng);
  const double mean = draws.mean();
  const double var = (draws.array() - mean).square().sum() / static_cast<double>(draws.size());
  CHECK_THAT(mean, WithinAbs(0.0, 0.02));
  CHECK_THAT(var, WithinAbs(1.0 + a_n * a_n, 0.03));
}

namespace {

FittedTransformModel toy_model(Variant variant, double theta) {
  FittedTransformModel model;
  model.theta_hat = theta;
  model.variant = variant;
  model.x = Eigen::MatrixXd(4, 1);
  model.x << 0.1, 0.35, 0.6, 0.9;
  model.fitted_mean = Eigen::VectorXd(4);
  model.fitted_mean << 1.0, 1.5, 2.0, 2.5;
  model.fitted_sigma = Eigen::VectorXd::Ones(4);
  model.residuals = Eigen::VectorXd::Zero(4);
  return model;
}

} // namespace

TEST_CASE("zero smoothing and flat residuals give a deterministic sample") {
  auto model = toy_model(Variant::homoscedastic, 0.5);
  BootstrapConfig cfg;
  cfg.variant = Variant::homoscedastic;
  cfg.smoothing = [](int) { return 0.0; };
  std::mt19937_64 rng(9);
  const Dataset sample = draw_bootstrap_sample(model, cfg, rng);
  std::map<double, double> mean_by_x;
  for (int i = 0; i < 4; ++i) mean_by_x[model.x(i, 0)] = model.fitted_mean[i];
  for (Eigen::Index i = 0; i < sample.n(); ++i) {
    REQUIRE(mean_by_x.count(sample.x(i, 0)) == 1);
    CHECK_THAT(sample.y[i], WithinAbs(yj_inverse(0.5, mean_by_x[sample.x(i, 0)]), 1e-12));
  }
}

TEST_CASE("bootstrap covariates are resampled from the original rows") {
  std::mt19937_64 data_rng(55);
  const Dataset data = sim::gen_htm1(60, 0.5, data_rng);
  EstimatorConfig cfg;
  const auto model = fit(data, cfg);
  BootstrapConfig boot;
  std::mt19937_64 rng(7);
  const Dataset sample = draw_bootstrap_sample(model, boot, rng);
  std::map<double, int> rows;
  for (Eigen::Index i = 0; i < data.n(); ++i) ++rows[data.x(i, 0)];
  for (Eigen::Index i = 0; i < sample.n(); ++i) CHECK(rows.count(sample.x(i, 0)) == 1);
}

TEST_CASE("out-of-range targets exhaust redraws and abort the replicate") {
  auto model = toy_model(Variant::homoscedastic, -1.0);
  model.fitted_mean << 5.0, 5.0, 5.0, 5.0; // z* near 5: needs theta z + 1 > 0, violated at theta=-1
  BootstrapConfig cfg;
  cfg.variant = Variant::homoscedastic;
  cfg.smoothing = [](int) { return 0.0; };
  cfg.max_redraws = 10;
  std::mt19937_64 rng(3);
  CHECK_THROWS_AS(draw_bootstrap_sample(model, cfg, rng), std::runtime_error);
}

TEST_CASE("critical value and p-value rules") {
  const std::vector<double> stats = {1.0, 2.0, 3.0, 4.0};
  // floor(4 * 0.95) = 3: third order statistic in increasing order
  CHECK(bootstrap_critical_value(stats, 0.05) == 3.0);
  CHECK(bootstrap_critical_value(stats, 0.75) == 1.0);
  CHECK(bootstrap_critical_value(stats, 0.5) == 2.0);

  CHECK(bootstrap_pvalue(stats, 0.5) == 1.0);
  CHECK(bootstrap_pvalue(stats, 5.0) == 0.0);
  CHECK(bootstrap_pvalue(stats, 2.0) == 0.75);
  CHECK(bootstrap_pvalue(stats, 2.5) == 0.5);
}

TEST_CASE("run_test produces a coherent result") {
  std::mt19937_64 data_rng(21);
  const Dataset data = sim::gen_htm1(40, 0.5, data_rng);
  EstimatorConfig cfg;
  cfg.variant = Variant::homoscedastic;
  BootstrapConfig boot;
  boot.B = 16;
  boot.alpha = 0.25;
  boot.variant = Variant::homoscedastic;
  boot.seed = 1234;
  const TestResult res = run_test(data, cfg, boot);

  CHECK(res.failures == 0);
  CHECK(static_cast<int>(res.boot_stats.size()) == boot.B);
  CHECK(res.pvalue_ks >= 0.0);
  CHECK(res.pvalue_ks <= 1.0);
  CHECK(res.pvalue_cm >= 0.0);
  CHECK(res.pvalue_cm <= 1.0);
  CHECK(res.reject_ks == (res.observed.ks > res.critical_ks));
  CHECK(res.reject_cm == (res.observed.cm > res.critical_cm));

  // order-statistic coherence between decisions and p-values
  const double slack = 1.0 / boot.B;
  if (res.reject_ks) CHECK(res.pvalue_ks <= boot.alpha + slack);
  if (!res.reject_ks) CHECK(res.pvalue_ks >= boot.alpha);
  if (res.reject_cm) CHECK(res.pvalue_cm <= boot.alpha + slack);
  if (!res.reject_cm) CHECK(res.pvalue_cm >= boot.alpha);
}

TEST_CASE("run_test is deterministic across thread counts") {
  std::mt19937_64 data_rng(77);
  const Dataset data = sim::gen_htm1(40, 0.5, data_rng);
  EstimatorConfig cfg;
  cfg.variant = Variant::homoscedastic;
  BootstrapConfig boot;
  boot.B = 12;
  boot.alpha = 0.1;
  boot.variant = Variant::homoscedastic;
  boot.seed = 99;

  boot.threads = 1;
  const TestResult r1 = run_test(data, cfg, boot);
  boot.threads = 3;
  const TestResult r3 = run_test(data, cfg, boot);

  REQUIRE(r1.boot_stats.size() == r3.boot_stats.size());
  for (std::size_t b = 0; b < r1.boot_stats.size(); ++b) {
    CHECK(r1.boot_stats[b].first == r3.boot_stats[b].first);
    CHECK(r1.boot_stats[b].second == r3.boot_stats[b].second);
  }
  CHECK(r1.critical_ks == r3.critical_ks);
  CHECK(r1.critical_cm == r3.critical_cm);
  CHECK(r1.pvalue_ks == r3.pvalue_ks);
  CHECK(r1.pvalue_cm == r3.pvalue_cm);
}

TEST_CASE("run_test validates variant agreement") {
  std::mt19937_64 data_rng(5);
  const Dataset data = sim::gen_htm1(40, 0.5, data_rng);
  EstimatorConfig cfg;
  cfg.variant = Variant::heteroscedastic;
  BootstrapConfig boot;
  boot.variant = Variant::homoscedastic;
  CHECK_THROWS_AS(run_test(data, cfg, boot), std::invalid_argument);
}
