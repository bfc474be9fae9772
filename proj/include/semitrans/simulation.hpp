#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "semitrans/bootstrap.hpp"
#include "semitrans/dataset.hpp"
#include "semitrans/estimator.hpp"
#include "semitrans/parallel.hpp"
#include "semitrans/rng.hpp"
#include "semitrans/yeo_johnson.hpp"

namespace semitrans {
namespace sim {

//! Moments of the skew-t distribution ST(0, 1, alpha, nu) of Azzalini:
//! mean = b_nu delta, var = nu/(nu-2) - mean^2, delta = alpha/sqrt(1+alpha^2),
//! b_nu = sqrt(nu/pi) Gamma((nu-1)/2) / Gamma(nu/2). Requires nu > 2.
struct SkewTMoments {
  double mean = 0.0;
  double var = 1.0;
};

inline SkewTMoments skewt_moments(double alpha, double nu) {
  if (!(nu > 2.0)) throw std::invalid_argument("skewt_moments: need nu > 2");
  const double delta = alpha / std::sqrt(1.0 + alpha * alpha);
  const double b_nu =
      std::sqrt(nu / M_PI) * std::exp(std::lgamma(0.5 * (nu - 1.0)) - std::lgamma(0.5 * nu));
  SkewTMoments m;
  m.mean = b_nu * delta;
  m.var = nu / (nu - 2.0) - m.mean * m.mean;
  return m;
}

//! Draw from ST(0, 1, alpha, nu): skew-normal delta|Z0| + sqrt(1-delta^2) Z1
//! divided by sqrt(chi2_nu / nu).
inline double skewt_sample(double alpha, double nu, std::mt19937_64& rng) {
  if (!(nu > 2.0)) throw std::invalid_argument("skewt_sample: need nu > 2");
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::chi_squared_distribution<double> chi2(nu);
  const double delta = alpha / std::sqrt(1.0 + alpha * alpha);
  const double z0 = gauss(rng);
  const double z1 = gauss(rng);
  const double sn = delta * std::abs(z0) + std::sqrt(1.0 - delta * delta) * z1;
  return sn / std::sqrt(chi2(rng) / nu);
}

namespace detail {

inline double htm1_mean(double x) { return std::exp(x) + 1.5; }

inline Dataset assemble(const std::vector<double>& xs, const std::vector<double>& zs) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = xs[static_cast<std::size_t>(i)];
    y[i] = yj_inverse(0.0, zs[static_cast<std::size_t>(i)]);
  }
  return Dataset(std::move(x), y);
}

} // namespace detail

//! Data from the reference model: Lambda_0(Y) = exp(X) + 1.5 + (1 + a(X-1)) eps,
//! X uniform on [0, 1], eps standard normal. Requires a <= 1 so the scale
//! stays positive on the covariate range.
inline Dataset gen_htm1(int n, double a, std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("gen_htm1: need n >= 1");
  if (!(a <= 1.0) || !std::isfinite(a))
    throw std::invalid_argument("gen_htm1: scale 1 + a(x-1) must stay positive on [0, 1] (need a <= 1)");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> xs(static_cast<std::size_t>(n)), zs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double x = unif(rng);
    const double sigma = 1.0 + a * (x - 1.0);
    xs[static_cast<std::size_t>(i)] = x;
    zs[static_cast<std::size_t>(i)] = detail::htm1_mean(x) + sigma * gauss(rng);
  }
  return detail::assemble(xs, zs);
}

//! Model A: scale x, error N(0,1) for x > 0.5 and a standardized skew-t for
//! x <= 0.5. Both conditional error laws have mean 0 and variance 1.
inline Dataset gen_model_a(int n, double alpha_skew, double nu, std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("gen_model_a: need n >= 1");
  const SkewTMoments mom = skewt_moments(alpha_skew, nu); // validates nu
  const double sd = std::sqrt(mom.var);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> xs(static_cast<std::size_t>(n)), zs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double x = unif(rng);
    const double eps =
        x > 0.5 ? gauss(rng) : (skewt_sample(alpha_skew, nu, rng) - mom.mean) / sd;
    xs[static_cast<std::size_t>(i)] = x;
    zs[static_cast<std::size_t>(i)] = detail::htm1_mean(x) + x * eps;
  }
  return detail::assemble(xs, zs);
}

//! Model B: scale x, error N(0,1) for x > 0.5 and (W - eta)/sqrt(2 eta) with
//! W chi-squared(eta) for x <= 0.5. Requires eta >= 2.
inline Dataset gen_model_b(int n, double eta, std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("gen_model_b: need n >= 1");
  if (!(eta >= 2.0)) throw std::invalid_argument("gen_model_b: need eta >= 2");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::chi_squared_distribution<double> chi2(eta);
  std::vector<double> xs(static_cast<std::size_t>(n)), zs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double x = unif(rng);
    const double eps = x > 0.5 ? gauss(rng) : (chi2(rng) - eta) / std::sqrt(2.0 * eta);
    xs[static_cast<std::size_t>(i)] = x;
    zs[static_cast<std::size_t>(i)] = detail::htm1_mean(x) + x * eps;
  }
  return detail::assemble(xs, zs);
}

//! Tabular experiment output with a CSV rendering.
struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::string to_csv() const {
    std::ostringstream out;
    out << std::setprecision(10);
    for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
    out << "\n";
    for (const auto& row : rows) {
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
      out << "\n";
    }
    return out.str();
  }
};

enum class Table { t1 = 1, t2 = 2, t3 = 3, t4 = 4 };

struct ExperimentConfig {
  Table table = Table::t1;
  int replications = 200;
  int bootstrap_B = 200;
  std::vector<int> sample_sizes;                       // per-table default when empty
  std::vector<double> a_values;                        // tables 1-2
  std::vector<std::pair<double, double>> model_a_cells; // table 3: (alpha_skew, nu)
  std::vector<double> eta_values;                      // table 4
  std::vector<double> alpha_levels = {0.05, 0.10};     // tables 2-4
  std::uint64_t seed = 1;
  int threads = 1;
  EstimatorConfig estimator; // variant is forced per table

  void apply_table_defaults() {
    switch (table) {
      case Table::t1:
        if (sample_sizes.empty()) sample_sizes = {100, 200, 400};
        if (a_values.empty()) a_values = {0.5, 0.75, 1.0};
        break;
      case Table::t2:
        if (sample_sizes.empty()) sample_sizes = {100, 200};
        if (a_values.empty()) a_values = {0.0, 0.5, 0.75, 1.0};
        break;
      case Table::t3:
        if (sample_sizes.empty()) sample_sizes = {100, 200};
        if (model_a_cells.empty())
          model_a_cells = {{100.0, 2.1}, {0.0, 2.1}, {0.0, 5.0}, {0.0, 1e6}};
        break;
      case Table::t4:
        if (sample_sizes.empty()) sample_sizes = {100, 200};
        if (eta_values.empty()) eta_values = {2.0, 3.0, 5.0, 10.0, 1e6};
        break;
    }
  }
};

namespace detail {

struct PowerCell {
  std::vector<double> params; // leading identification columns
  int n = 0;
};

//! Rejection rates for one cell across replications: for each alpha level the
//! KS and CM rates over the successful replicates, plus the failure count.
inline std::vector<double> run_power_cell(const std::vector<double>& params, int n,
                                          const ExperimentConfig& cfg, Variant variant,
                                          std::size_t cell_index,
                                          const std::function<Dataset(std::mt19937_64&)>& gen) {
  const int reps = cfg.replications;
  const std::size_t n_alpha = cfg.alpha_levels.size();
  std::vector<std::vector<std::pair<bool, bool>>> rejects(
      static_cast<std::size_t>(reps), std::vector<std::pair<bool, bool>>(n_alpha));
  std::vector<int> status(static_cast<std::size_t>(reps), 0);

  EstimatorConfig est = cfg.estimator;
  est.variant = variant;

  parallel_for(reps, cfg.threads, [&](int r) {
    std::mt19937_64 rng(derive_seed(cfg.seed, cell_index, static_cast<std::uint64_t>(r)));
    try {
      const Dataset data = gen(rng);
      BootstrapConfig boot;
      boot.B = cfg.bootstrap_B;
      boot.alpha = cfg.alpha_levels.front();
      boot.variant = variant;
      boot.seed = derive_seed(cfg.seed, cell_index + 1000003, static_cast<std::uint64_t>(r));
      boot.threads = 1;
      const TestResult res = run_test(data, est, boot);
      std::vector<double> ks, cm;
      ks.reserve(res.boot_stats.size());
      cm.reserve(res.boot_stats.size());
      for (const auto& [k, c] : res.boot_stats) {
        ks.push_back(k);
        cm.push_back(c);
      }
      for (std::size_t a = 0; a < n_alpha; ++a) {
        const double level = cfg.alpha_levels[a];
        rejects[static_cast<std::size_t>(r)][a] = {
            res.observed.ks > bootstrap_critical_value(ks, level),
            res.observed.cm > bootstrap_critical_value(cm, level)};
      }
      status[static_cast<std::size_t>(r)] = 1;
    } catch (const std::exception&) {
      status[static_cast<std::size_t>(r)] = -1;
    }
  });

  int ok = 0, failures = 0;
  std::vector<double> ks_rate(n_alpha, 0.0), cm_rate(n_alpha, 0.0);
  for (int r = 0; r < reps; ++r) {
    if (status[static_cast<std::size_t>(r)] == 1) {
      ++ok;
      for (std::size_t a = 0; a < n_alpha; ++a) {
        ks_rate[a] += rejects[static_cast<std::size_t>(r)][a].first ? 1.0 : 0.0;
        cm_rate[a] += rejects[static_cast<std::size_t>(r)][a].second ? 1.0 : 0.0;
      }
    } else {
      ++failures;
    }
  }
  std::vector<double> row = params;
  row.push_back(static_cast<double>(n));
  row.push_back(static_cast<double>(reps));
  row.push_back(static_cast<double>(cfg.bootstrap_B));
  for (std::size_t a = 0; a < n_alpha; ++a) {
    row.push_back(ok > 0 ? ks_rate[a] / ok : 0.0);
    row.push_back(ok > 0 ? cm_rate[a] / ok : 0.0);
  }
  row.push_back(static_cast<double>(failures));
  return row;
}

} // namespace detail

//! Monte Carlo experiment runner for the four report tables. Replication r of
//! cell c uses RNG substreams derived from (seed, c, r), so the output is
//! identical for any thread count.
inline ResultTable run_experiment(ExperimentConfig cfg) {
  cfg.apply_table_defaults();
  cfg.estimator.validate();
  ResultTable out;

  if (cfg.table == Table::t1) {
    out.columns = {"a", "n", "replications", "mean", "mse", "failures"};
    std::size_t cell_index = 0;
    for (double a : cfg.a_values) {
      for (int n : cfg.sample_sizes) {
        const int reps = cfg.replications;
        std::vector<double> thetas(static_cast<std::size_t>(reps),
                                   std::numeric_limits<double>::quiet_NaN());
        EstimatorConfig est = cfg.estimator;
        est.variant = Variant::heteroscedastic;
        parallel_for(reps, cfg.threads, [&](int r) {
          std::mt19937_64 rng(derive_seed(cfg.seed, cell_index, static_cast<std::uint64_t>(r)));
          try {
            const Dataset data = gen_htm1(n, a, rng);
            thetas[static_cast<std::size_t>(r)] = fit(data, est).theta_hat;
          } catch (const std::exception&) {
          }
        });
        double sum = 0.0, sumsq = 0.0;
        int ok = 0, failures = 0;
        for (int r = 0; r < reps; ++r) {
          const double t = thetas[static_cast<std::size_t>(r)];
          if (std::isfinite(t)) {
            sum += t;
            sumsq += t * t;
            ++ok;
          } else {
            ++failures;
          }
        }
        const double mean = ok > 0 ? sum / ok : 0.0;
        const double mse = ok > 0 ? sumsq / ok : 0.0; // theta_0 = 0 for this model
        out.rows.push_back({a, static_cast<double>(n), static_cast<double>(reps), mean, mse,
                            static_cast<double>(failures)});
        ++cell_index;
      }
    }
    return out;
  }

  auto rate_columns = [&](std::vector<std::string> lead) {
    lead.insert(lead.end(), {"n", "replications", "B"});
    for (double a : cfg.alpha_levels) {
      std::ostringstream ks, cm;
      ks << "ks_" << a;
      cm << "cm_" << a;
      lead.push_back(ks.str());
      lead.push_back(cm.str());
    }
    lead.push_back("failures");
    return lead;
  };

  std::size_t cell_index = 0;
  if (cfg.table == Table::t2) {
    out.columns = rate_columns({"a"});
    for (double a : cfg.a_values)
      for (int n : cfg.sample_sizes) {
        out.rows.push_back(detail::run_power_cell(
            {a}, n, cfg, Variant::homoscedastic, cell_index,
            [&, a, n](std::mt19937_64& rng) { return gen_htm1(n, a, rng); }));
        ++cell_index;
      }
  } else if (cfg.table == Table::t3) {
    out.columns = rate_columns({"alpha_skew", "nu"});
    for (const auto& [alpha_skew, nu] : cfg.model_a_cells)
      for (int n : cfg.sample_sizes) {
        out.rows.push_back(detail::run_power_cell(
            {alpha_skew, nu}, n, cfg, Variant::heteroscedastic, cell_index,
            [&, alpha_skew, nu, n](std::mt19937_64& rng) {
              return gen_model_a(n, alpha_skew, nu, rng);
            }));
        ++cell_index;
      }
  } else {
    out.columns = rate_columns({"eta"});
    for (double eta : cfg.eta_values)
      for (int n : cfg.sample_sizes) {
        out.rows.push_back(detail::run_power_cell(
            {eta}, n, cfg, Variant::heteroscedastic, cell_index,
            [&, eta, n](std::mt19937_64& rng) { return gen_model_b(n, eta, rng); }));
        ++cell_index;
      }
  }
  return out;
}

//! Scatter and fitted-curve rows behind the transform-versus-covariate plot:
//! one row per observation (X_i, Lambda_theta(Y_i), m_theta(X_i)) plus a
//! dense curve grid when the covariate is one-dimensional.
struct FitCurve {
  Eigen::MatrixXd obs_x;
  Eigen::VectorXd obs_lambda;
  Eigen::VectorXd obs_fit;
  Eigen::VectorXd grid_x;
  Eigen::VectorXd grid_fit;

  std::string to_csv() const {
    std::ostringstream out;
    out << std::setprecision(10) << "kind";
    for (Eigen::Index j = 0; j < obs_x.cols(); ++j) out << ",x" << (j + 1);
    out << ",lambda_y,m_hat\n";
    for (Eigen::Index i = 0; i < obs_x.rows(); ++i) {
      out << "obs";
      for (Eigen::Index j = 0; j < obs_x.cols(); ++j) out << "," << obs_x(i, j);
      out << "," << obs_lambda[i] << "," << obs_fit[i] << "\n";
    }
    for (Eigen::Index i = 0; i < grid_x.size(); ++i)
      out << "grid," << grid_x[i] << ",," << grid_fit[i] << "\n";
    return out.str();
  }
};

inline FitCurve export_fit_curve(const FittedTransformModel& model, const Dataset& data,
                                 double theta, int grid_points = 200) {
  data.validate();
  const Eigen::Index n = data.n();
  FitCurve curve;
  curve.obs_x = data.x;
  curve.obs_lambda.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) curve.obs_lambda[i] = yj_value(theta, data.y[i]);

  std::optional<LocalPolynomialFit> refit;
  const LocalPolynomialFit* mfit = nullptr;
  if (theta == model.theta_hat && model.m_fit) {
    mfit = &*model.m_fit;
  } else {
    Eigen::VectorXd h;
    if (model.config.fixed_bandwidths) {
      h = model.config.fixed_bandwidths->h;
    } else if (model.config.bandwidth_method == BandwidthMethod::plugin && n >= 20) {
      h = bandwidth::rsw_plugin_multi(data.x, curve.obs_lambda);
    } else {
      h = semitrans::detail::rot_per_column(data.x);
    }
    refit.emplace(data.x, curve.obs_lambda, model.config.degree, h,
                  model.config.regression_kernel);
    mfit = &*refit;
  }

  curve.obs_fit.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    curve.obs_fit[i] = mfit->evaluate(data.x.row(i).transpose());

  if (data.dim() == 1 && grid_points > 1) {
    const double lo = data.x.col(0).minCoeff();
    const double hi = data.x.col(0).maxCoeff();
    curve.grid_x.resize(grid_points);
    curve.grid_fit.resize(grid_points);
    for (int k = 0; k < grid_points; ++k) {
      const double xk = lo + (hi - lo) * k / (grid_points - 1);
      curve.grid_x[k] = xk;
      curve.grid_fit[k] = mfit->evaluate(xk);
    }
  }
  return curve;
}

} // namespace sim
} // namespace semitrans
