#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "semitrans/bandwidth.hpp"
#include "semitrans/dataset.hpp"
#include "semitrans/kde.hpp"
#include "semitrans/kernels.hpp"
#include "semitrans/local_polynomial.hpp"
#include "semitrans/yeo_johnson.hpp"

namespace semitrans {

enum class Variant { heteroscedastic, homoscedastic };
enum class BandwidthMethod { plugin, rot };

struct EstimatorConfig {
  double theta_lo = -2.0;
  double theta_hi = 4.0;
  int grid_points = 61;
  double refine_tol = 1e-4;
  int degree = 1;
  KernelSpec regression_kernel = KernelSpec::gaussian;
  KernelSpec density_kernel = KernelSpec::gaussian;
  Variant variant = Variant::heteroscedastic;
  double density_floor = 1e-10;
  BandwidthMethod bandwidth_method = BandwidthMethod::plugin;
  std::optional<BandwidthVec> fixed_bandwidths; // bypasses data-driven selection

  void validate() const {
    if (!(theta_lo <= theta_hi) || !std::isfinite(theta_lo) || !std::isfinite(theta_hi))
      throw std::invalid_argument("EstimatorConfig: invalid theta interval");
    if (theta_lo < theta_hi && grid_points < 5)
      throw std::invalid_argument("EstimatorConfig: need at least 5 grid points");
    if (!(refine_tol > 0.0)) throw std::invalid_argument("EstimatorConfig: refine_tol must be positive");
    if (degree < 0) throw std::invalid_argument("EstimatorConfig: negative degree");
    if (!(density_floor > 0.0)) throw std::invalid_argument("EstimatorConfig: density_floor must be positive");
    if (fixed_bandwidths) fixed_bandwidths->validate();
  }
};

struct FittedTransformModel {
  double theta_hat = 0.0;
  Variant variant = Variant::heteroscedastic;
  EstimatorConfig config;
  BandwidthVec bandwidths;

  // fitted components at theta_hat
  std::optional<LocalPolynomialFit> m_fit;
  std::optional<VarianceFit> variance_fit; // heteroscedastic only

  Eigen::MatrixXd x;            // training covariates
  Eigen::VectorXd residuals;    // standardized (hetero) or centered at m (homo)
  Eigen::VectorXd sorted_residuals;
  Eigen::VectorXd fitted_mean;  // m(X_i)
  Eigen::VectorXd fitted_sigma; // sigma(X_i); identically 1 for the homoscedastic variant
  double loglik = 0.0;

  double mean_at(const Eigen::VectorXd& p) const { return m_fit->evaluate(p); }
  double sigma_at(const Eigen::VectorXd& p) const {
    return variant == Variant::heteroscedastic ? variance_fit->sigma(p) : 1.0;
  }
};

namespace detail {

//! Profile log-likelihood as a function of theta with data, bandwidths and
//! the equivalent-kernel smoother matrix fixed. The smoother is built once;
//! each evaluation transforms the responses and applies it, so the objective
//! is smooth in theta and cheap to scan.
class ProfileObjective {
 public:
  ProfileObjective(const Dataset& data, const EstimatorConfig& cfg, const BandwidthVec& bw)
      : y_(data.y), cfg_(cfg), g_(bw.g) {
    bw.validate();
    const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(data.n());
    LocalPolynomialFit proto(data.x, zeros, cfg.degree, bw.h, cfg.regression_kernel);
    smoother_ = proto.smoother_matrix(data.x);
  }

  double operator()(double theta) const {
    const Eigen::Index n = y_.size();
    Eigen::VectorXd z(n);
    double jac = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      z[i] = yj_value(theta, y_[i]);
      jac += std::log(yj_deriv_y(theta, y_[i]));
    }
    if (!z.allFinite() || !std::isfinite(jac)) {
      std::ostringstream msg;
      msg << "profile_loglik: transform overflow at theta = " << theta;
      throw std::runtime_error(msg.str());
    }

    const Eigen::VectorXd m = smoother_ * z;
    Eigen::VectorXd eps(n);
    double log_scale = 0.0;
    if (cfg_.variant == Variant::heteroscedastic) {
      const Eigen::VectorXd s = smoother_ * z.array().square().matrix();
      const double floor = variance_floor_for(z);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double sig2 = std::max(s[i] - m[i] * m[i], floor);
        const double sig = std::sqrt(sig2);
        eps[i] = (z[i] - m[i]) / sig;
        log_scale += std::log(sig);
      }
    } else {
      eps = z - m;
      const double mu = eps.mean();
      const double var = (eps.array() - mu).square().sum() / static_cast<double>(n);
      // the density bandwidth lives on the standardized scale; dividing by
      // the residual sd keeps the fixed g scale-matched at every theta
      const double scale = std::max(std::sqrt(var), 1e-150);
      eps /= scale;
      log_scale = static_cast<double>(n) * std::log(scale);
    }

    if (!eps.allFinite() || !std::isfinite(log_scale)) {
      std::ostringstream msg;
      msg << "profile_loglik: residual overflow at theta = " << theta;
      throw std::runtime_error(msg.str());
    }
    KernelDensity f(eps, g_, cfg_.density_kernel);
    const Eigen::VectorXd dens = f.evaluate_at(eps);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      ll += std::log(std::max(dens[i], cfg_.density_floor));
    const double value = ll + jac - log_scale;
    if (!std::isfinite(value)) {
      std::ostringstream msg;
      msg << "profile_loglik: non-finite objective at theta = " << theta;
      throw std::runtime_error(msg.str());
    }
    return value;
  }

 private:
  Eigen::VectorXd y_;
  EstimatorConfig cfg_;
  double g_;
  Eigen::MatrixXd smoother_;
};

inline Eigen::VectorXd rot_per_column(const Eigen::MatrixXd& x) {
  Eigen::VectorXd h(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) h[j] = bandwidth::rot_bandwidth(x.col(j));
  return h;
}

//! Residuals of the working fit at theta with bandwidth h. Heteroscedastic:
//! standardized by the local scale. Homoscedastic: centered residuals scaled
//! by their sample sd (the density bandwidth is selected on that scale).
inline Eigen::VectorXd standardized_residuals_at(const Dataset& data, double theta,
                                                 const EstimatorConfig& cfg,
                                                 const Eigen::VectorXd& h) {
  const Eigen::Index n = data.n();
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = yj_value(theta, data.y[i]);
  LocalPolynomialFit proto(data.x, z, cfg.degree, h, cfg.regression_kernel);
  const Eigen::MatrixXd smoother = proto.smoother_matrix(data.x);
  const Eigen::VectorXd m = smoother * z;
  Eigen::VectorXd eps(n);
  if (cfg.variant == Variant::heteroscedastic) {
    const Eigen::VectorXd s = smoother * z.array().square().matrix();
    const double floor = variance_floor_for(z);
    for (Eigen::Index i = 0; i < n; ++i)
      eps[i] = (z[i] - m[i]) / std::sqrt(std::max(s[i] - m[i] * m[i], floor));
  } else {
    eps = z - m;
    const double mu = eps.mean();
    const double sd =
        std::max(std::sqrt((eps.array() - mu).square().sum() / static_cast<double>(n)), 1e-150);
    eps /= sd;
  }
  return eps;
}

inline BandwidthVec select_bandwidths(const Dataset& data, double theta,
                                      const EstimatorConfig& cfg) {
  const Eigen::Index n = data.n();
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = yj_value(theta, data.y[i]);

  BandwidthVec bw;
  if (cfg.bandwidth_method == BandwidthMethod::plugin && n >= 20) {
    bw.h.resize(data.dim());
    for (Eigen::Index j = 0; j < data.dim(); ++j)
      bw.h[j] = bandwidth::rsw_plugin(data.x.col(j), z);
  } else {
    bw.h = rot_per_column(data.x);
  }

  const Eigen::VectorXd eps = standardized_residuals_at(data, theta, cfg, bw.h);
  if (cfg.bandwidth_method == BandwidthMethod::plugin && n >= 20) {
    bw.g = bandwidth::sj_plugin(eps);
  } else {
    bw.g = bandwidth::rot_bandwidth(eps);
  }
  return bw;
}

//! Deterministic golden-section refinement of a maximum inside [lo, hi].
//! Returns the best (theta, value) seen, including the supplied seed point.
inline std::pair<double, double> golden_section_max(const std::function<double(double)>& f,
                                                    double lo, double hi, double tol,
                                                    double seed_theta, double seed_value) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double best_t = seed_theta;
  double best_v = seed_value;
  double a = lo, b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c);
  double fd = f(d);
  auto consider = [&](double t, double v) {
    if (v > best_v) {
      best_v = v;
      best_t = t;
    }
  };
  consider(c, fc);
  consider(d, fd);
  int guard = 0;
  while (b - a > tol && ++guard < 200) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
      consider(c, fc);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
      consider(d, fd);
    }
  }
  return {best_t, best_v};
}

} // namespace detail

//! Profile log-likelihood at theta:
//!   sum_i log f_hat(eps_i(theta)) + log Lambda'_theta(Y_i) - log scale_i(theta)
//! where f_hat is the kernel density of the standardized residuals with
//! bandwidth bw.g and scale_i is the fitted local scale (heteroscedastic) or
//! the residual sample sd (homoscedastic). Density values are floored at
//! cfg.density_floor before taking logs.
inline double profile_loglik(const Dataset& data, double theta, const EstimatorConfig& cfg,
                             const BandwidthVec& bw) {
  data.validate();
  cfg.validate();
  if (theta < cfg.theta_lo || theta > cfg.theta_hi)
    throw std::invalid_argument("profile_loglik: theta outside the search interval");
  detail::ProfileObjective obj(data, cfg, bw);
  return obj(theta);
}

//! Profile likelihood fit: coarse grid over the theta interval, golden-section
//! refinement on the bracketing cell, then a final fit with re-selected
//! bandwidths at theta_hat.
inline FittedTransformModel fit(const Dataset& data, const EstimatorConfig& cfg) {
  data.validate();
  cfg.validate();
  if (data.n() < 10) throw std::invalid_argument("fit: need at least 10 observations");

  const double pilot = 0.5 * (cfg.theta_lo + cfg.theta_hi);
  const BandwidthVec search_bw =
      cfg.fixed_bandwidths ? *cfg.fixed_bandwidths : detail::select_bandwidths(data, pilot, cfg);

  double theta_hat = cfg.theta_lo;
  if (cfg.theta_hi > cfg.theta_lo) {
    std::optional<detail::ProfileObjective> obj_storage;
    try {
      obj_storage.emplace(data, cfg, search_bw);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("fit: smoothing failed for every theta: ") + e.what());
    }
    const detail::ProfileObjective& obj = *obj_storage;
    const int grid = cfg.grid_points;
    std::vector<double> thetas(static_cast<std::size_t>(grid));
    std::vector<double> values(static_cast<std::size_t>(grid),
                               -std::numeric_limits<double>::infinity());
    std::vector<std::string> errors(static_cast<std::size_t>(grid));
    int n_ok = 0;
    for (int k = 0; k < grid; ++k) {
      const double t = cfg.theta_lo + (cfg.theta_hi - cfg.theta_lo) * k / (grid - 1);
      thetas[static_cast<std::size_t>(k)] = t;
      try {
        values[static_cast<std::size_t>(k)] = obj(t);
        ++n_ok;
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(k)] = e.what();
      }
    }
    if (n_ok == 0) {
      std::ostringstream msg;
      msg << "fit: profile likelihood failed at every grid point;";
      for (int k = 0; k < std::min(grid, 3); ++k)
        msg << " [theta=" << thetas[static_cast<std::size_t>(k)] << ": "
            << errors[static_cast<std::size_t>(k)] << "]";
      throw std::runtime_error(msg.str());
    }
    int kbest = 0;
    for (int k = 1; k < grid; ++k)
      if (values[static_cast<std::size_t>(k)] > values[static_cast<std::size_t>(kbest)]) kbest = k;
    const double lo = thetas[static_cast<std::size_t>(std::max(kbest - 1, 0))];
    const double hi = thetas[static_cast<std::size_t>(std::min(kbest + 1, grid - 1))];
    auto safe_obj = [&](double t) {
      try {
        return obj(t);
      } catch (const std::exception&) {
        return -std::numeric_limits<double>::infinity();
      }
    };
    theta_hat = detail::golden_section_max(safe_obj, lo, hi, cfg.refine_tol,
                                           thetas[static_cast<std::size_t>(kbest)],
                                           values[static_cast<std::size_t>(kbest)])
                    .first;
  }

  const BandwidthVec final_bw =
      cfg.fixed_bandwidths ? *cfg.fixed_bandwidths : detail::select_bandwidths(data, theta_hat, cfg);

  // assemble the fitted model at theta_hat
  const Eigen::Index n = data.n();
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = yj_value(theta_hat, data.y[i]);
  if (!z.allFinite() ||
      (cfg.variant == Variant::heteroscedastic && !z.array().square().matrix().allFinite())) {
    std::ostringstream msg;
    msg << "fit: transform overflow in the final fit at theta_hat = " << theta_hat;
    throw std::runtime_error(msg.str());
  }

  FittedTransformModel model;
  model.theta_hat = theta_hat;
  model.variant = cfg.variant;
  model.config = cfg;
  model.bandwidths = final_bw;
  model.x = data.x;
  model.fitted_mean.resize(n);
  model.fitted_sigma.resize(n);

  if (cfg.variant == Variant::heteroscedastic) {
    VarianceFit vf = cond_variance_fit(data.x, z, cfg.degree, final_bw.h, cfg.regression_kernel);
    const Eigen::MatrixXd smoother = vf.mean_fit().smoother_matrix(data.x);
    const Eigen::VectorXd m = smoother * z;
    const Eigen::VectorXd s = smoother * z.array().square().matrix();
    model.residuals.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sig = std::sqrt(std::max(s[i] - m[i] * m[i], vf.variance_floor()));
      model.fitted_mean[i] = m[i];
      model.fitted_sigma[i] = sig;
      model.residuals[i] = (z[i] - m[i]) / sig;
    }
    model.variance_fit = std::move(vf);
    model.m_fit = model.variance_fit->mean_fit();
  } else {
    LocalPolynomialFit mf(data.x, z, cfg.degree, final_bw.h, cfg.regression_kernel);
    const Eigen::MatrixXd smoother = mf.smoother_matrix(data.x);
    const Eigen::VectorXd m = smoother * z;
    model.residuals = z - m;
    model.fitted_mean = m;
    model.fitted_sigma.setOnes();
    model.m_fit = std::move(mf);
  }

  model.sorted_residuals = model.residuals;
  std::sort(model.sorted_residuals.data(), model.sorted_residuals.data() + n);
  model.loglik = detail::ProfileObjective(data, cfg, final_bw)(theta_hat);
  return model;
}

//! Empirical distribution function of the fitted residuals.
inline double empirical_error_cdf(const FittedTransformModel& model, double y) {
  const Eigen::Index n = model.sorted_residuals.size();
  if (n == 0) throw std::invalid_argument("empirical_error_cdf: model has no residuals");
  const double* begin = model.sorted_residuals.data();
  const double* end = begin + n;
  return static_cast<double>(std::upper_bound(begin, end, y) - begin) / static_cast<double>(n);
}

} // namespace semitrans
