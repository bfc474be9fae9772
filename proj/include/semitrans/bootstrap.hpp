#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "semitrans/dataset.hpp"
#include "semitrans/estimator.hpp"
#include "semitrans/independence_test.hpp"
#include "semitrans/parallel.hpp"
#include "semitrans/rng.hpp"
#include "semitrans/yeo_johnson.hpp"

namespace semitrans {

struct BootstrapConfig {
  int B = 200;
  double alpha = 0.05;
  std::function<double(int)> smoothing = [](int n) {
    return 0.5 * std::pow(static_cast<double>(n), -0.25);
  };
  Variant variant = Variant::heteroscedastic;
  std::uint64_t seed = 0;
  int threads = 1;
  double max_failure_rate = 0.05;
  int max_redraws = 100;

  void validate() const {
    if (B < 1) throw std::invalid_argument("BootstrapConfig: B must be >= 1");
    if (!(alpha > 0.0) || !(alpha < 1.0))
      throw std::invalid_argument("BootstrapConfig: alpha must be in (0, 1)");
    if (!smoothing) throw std::invalid_argument("BootstrapConfig: missing a_n rule");
  }
};

struct TestResult {
  TestStatistics observed;
  std::vector<std::pair<double, double>> boot_stats; // (ks*, cm*) per successful replicate
  double critical_ks = 0.0, critical_cm = 0.0;
  double pvalue_ks = 1.0, pvalue_cm = 1.0;
  bool reject_ks = false, reject_cm = false;
  int requested_B = 0;
  int failures = 0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  double theta_hat = 0.0;
};

//! Standardized residuals for resampling. Heteroscedastic: centered and
//! scaled to sample variance exactly one (1/n convention). Homoscedastic:
//! centered only.
inline Eigen::VectorXd standardize_residuals(const Eigen::VectorXd& eps, Variant variant) {
  const Eigen::Index n = eps.size();
  if (n < 2) throw std::invalid_argument("standardize_residuals: need n >= 2");
  const double mean = eps.mean();
  Eigen::VectorXd centered = eps.array() - mean;
  if (variant == Variant::homoscedastic) return centered;
  const double sd = std::sqrt(centered.squaredNorm() / static_cast<double>(n));
  if (!(sd > 0.0))
    throw std::invalid_argument("standardize_residuals: degenerate residuals (zero variance)");
  return centered / sd;
}

//! m smooth bootstrap errors eta* + a_n xi with eta* resampled from
//! tilde_eps and xi standard normal.
inline Eigen::VectorXd smooth_bootstrap_errors(const Eigen::VectorXd& tilde_eps, double a_n,
                                               Eigen::Index m, std::mt19937_64& rng) {
  if (tilde_eps.size() < 1) throw std::invalid_argument("smooth_bootstrap_errors: empty residuals");
  if (a_n < 0.0) throw std::invalid_argument("smooth_bootstrap_errors: negative smoothing");
  std::uniform_int_distribution<Eigen::Index> pick(0, tilde_eps.size() - 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd out(m);
  for (Eigen::Index i = 0; i < m; ++i) out[i] = tilde_eps[pick(rng)] + a_n * gauss(rng);
  return out;
}

//! One bootstrap sample from the fitted model: X* resampled from the rows of
//! the training covariates, Z* = m(X*) + sigma(X*) eps* (sigma = 1 for the
//! homoscedastic variant) and Y* the inverse transform of Z*. When Z* falls
//! outside the range of the transform at theta_hat, (eta*, xi) are redrawn
//! up to max_redraws times before the replicate is aborted.
inline Dataset draw_bootstrap_sample(const FittedTransformModel& model, const BootstrapConfig& cfg,
                                     std::mt19937_64& rng) {
  cfg.validate();
  const Eigen::Index n = model.x.rows();
  if (n < 2) throw std::invalid_argument("draw_bootstrap_sample: model too small");
  const double a_n = cfg.smoothing(static_cast<int>(n));
  if (a_n < 0.0) throw std::invalid_argument("draw_bootstrap_sample: a_n rule returned a negative value");
  const Eigen::VectorXd tilde = standardize_residuals(model.residuals, cfg.variant);

  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Eigen::MatrixXd xs(n, model.x.cols());
  Eigen::VectorXd ys(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index row = pick(rng);
    const double m = model.fitted_mean[row];
    const double s = cfg.variant == Variant::heteroscedastic ? model.fitted_sigma[row] : 1.0;
    bool ok = false;
    for (int attempt = 0; attempt <= cfg.max_redraws; ++attempt) {
      const double eps_star = tilde[pick(rng)] + a_n * gauss(rng);
      const double z = m + s * eps_star;
      if (yj_in_range(model.theta_hat, z)) {
        xs.row(i) = model.x.row(row);
        ys[i] = yj_inverse(model.theta_hat, z);
        ok = true;
        break;
      }
    }
    if (!ok) {
      std::ostringstream msg;
      msg << "draw_bootstrap_sample: Z* outside the transform range at theta_hat = "
          << model.theta_hat << " after " << cfg.max_redraws << " redraws (index " << i << ")";
      throw std::runtime_error(msg.str());
    }
  }
  return Dataset(std::move(xs), std::move(ys));
}

//! Critical value: the floor(B(1-alpha))-th order statistic of the bootstrap
//! statistics in increasing order, so P*(T* > c) is close to alpha.
inline double bootstrap_critical_value(std::vector<double> stats, double alpha) {
  if (stats.empty()) throw std::invalid_argument("bootstrap_critical_value: no statistics");
  if (!(alpha > 0.0) || !(alpha < 1.0))
    throw std::invalid_argument("bootstrap_critical_value: alpha must be in (0, 1)");
  const auto b = static_cast<double>(stats.size());
  auto k = static_cast<std::size_t>(std::floor(b * (1.0 - alpha) + 1e-9));
  k = std::clamp<std::size_t>(k, 1, stats.size());
  std::sort(stats.begin(), stats.end());
  return stats[k - 1];
}

//! p-value (1/B) #{b : T*_b >= observed}.
inline double bootstrap_pvalue(const std::vector<double>& stats, double observed) {
  if (stats.empty()) throw std::invalid_argument("bootstrap_pvalue: no statistics");
  std::size_t count = 0;
  for (double s : stats)
    if (s >= observed) ++count;
  return static_cast<double>(count) / static_cast<double>(stats.size());
}

//! Full bootstrap test: fit on the data, compute the observed KS/CM
//! statistics, then refit the entire pipeline on each bootstrap sample.
//! Replicate b draws from an independent substream derived from (seed, b),
//! so the result does not depend on the thread count.
inline TestResult run_test(const Dataset& data, const EstimatorConfig& est_cfg,
                           const BootstrapConfig& boot_cfg) {
  est_cfg.validate();
  boot_cfg.validate();
  if (est_cfg.variant != boot_cfg.variant)
    throw std::invalid_argument("run_test: estimator and bootstrap variants differ");

  const FittedTransformModel model = fit(data, est_cfg);

  TestResult result;
  result.observed = compute_statistics(data.x, model.residuals);
  result.requested_B = boot_cfg.B;
  result.alpha = boot_cfg.alpha;
  result.seed = boot_cfg.seed;
  result.theta_hat = model.theta_hat;

  std::vector<std::optional<std::pair<double, double>>> draws(static_cast<std::size_t>(boot_cfg.B));
  std::vector<std::string> errors(static_cast<std::size_t>(boot_cfg.B));
  parallel_for(boot_cfg.B, boot_cfg.threads, [&](int b) {
    std::mt19937_64 rng(derive_seed(boot_cfg.seed, static_cast<std::uint64_t>(b) + 1));
    try {
      const Dataset sample = draw_bootstrap_sample(model, boot_cfg, rng);
      const FittedTransformModel refit = fit(sample, est_cfg);
      const TestStatistics stats = compute_statistics(sample.x, refit.residuals);
      draws[static_cast<std::size_t>(b)] = std::make_pair(stats.ks, stats.cm);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(b)] = e.what();
    }
  });

  for (int b = 0; b < boot_cfg.B; ++b) {
    if (draws[static_cast<std::size_t>(b)])
      result.boot_stats.push_back(*draws[static_cast<std::size_t>(b)]);
    else
      ++result.failures;
  }
  if (result.failures > boot_cfg.max_failure_rate * boot_cfg.B) {
    std::ostringstream msg;
    msg << "run_test: " << result.failures << " of " << boot_cfg.B
        << " bootstrap replicates failed;";
    int shown = 0;
    for (int b = 0; b < boot_cfg.B && shown < 3; ++b)
      if (!draws[static_cast<std::size_t>(b)]) {
        msg << " [b=" << b << ": " << errors[static_cast<std::size_t>(b)] << "]";
        ++shown;
      }
    throw std::runtime_error(msg.str());
  }

  std::vector<double> ks_stats, cm_stats;
  ks_stats.reserve(result.boot_stats.size());
  cm_stats.reserve(result.boot_stats.size());
  for (const auto& [ks, cm] : result.boot_stats) {
    ks_stats.push_back(ks);
    cm_stats.push_back(cm);
  }
  result.critical_ks = bootstrap_critical_value(ks_stats, boot_cfg.alpha);
  result.critical_cm = bootstrap_critical_value(cm_stats, boot_cfg.alpha);
  result.pvalue_ks = bootstrap_pvalue(ks_stats, result.observed.ks);
  result.pvalue_cm = bootstrap_pvalue(cm_stats, result.observed.cm);
  result.reject_ks = result.observed.ks > result.critical_ks;
  result.reject_cm = result.observed.cm > result.critical_cm;
  return result;
}

} // namespace semitrans
