// Command-line interface: model estimation, bootstrap validity tests,
// simulation tables and fit-curve export.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "semitrans/semitrans.hpp"

namespace {

using nlohmann::json;

struct CommonOptions {
  std::string data_path;
  std::string out_path;
  std::string variant = "hetero";
  std::string theta_range = "-2:4";
  int grid = 61;
  int degree = 1;
  std::string kernel = "gaussian";
  std::string bandwidth = "plugin";
  std::uint64_t seed = 1;
  int threads = 0;
};

std::pair<double, double> parse_theta_range(const std::string& s) {
  const auto pos = s.find(':');
  if (pos == std::string::npos)
    throw CLI::ValidationError("--theta-range", "expected lo:hi, got '" + s + "'");
  try {
    const double lo = std::stod(s.substr(0, pos));
    const double hi = std::stod(s.substr(pos + 1));
    if (!(lo <= hi)) throw std::invalid_argument("lo > hi");
    return {lo, hi};
  } catch (const std::exception&) {
    throw CLI::ValidationError("--theta-range", "expected lo:hi, got '" + s + "'");
  }
}

semitrans::EstimatorConfig make_estimator_config(const CommonOptions& opt) {
  semitrans::EstimatorConfig cfg;
  const auto [lo, hi] = parse_theta_range(opt.theta_range);
  cfg.theta_lo = lo;
  cfg.theta_hi = hi;
  cfg.grid_points = opt.grid;
  cfg.degree = opt.degree;
  cfg.variant = opt.variant == "homo" ? semitrans::Variant::homoscedastic
                                      : semitrans::Variant::heteroscedastic;
  const auto kernel = opt.kernel == "epanechnikov" ? semitrans::KernelSpec::epanechnikov
                                                   : semitrans::KernelSpec::gaussian;
  cfg.regression_kernel = kernel;
  cfg.density_kernel = kernel;
  cfg.bandwidth_method = opt.bandwidth == "rot" ? semitrans::BandwidthMethod::rot
                                                : semitrans::BandwidthMethod::plugin;
  return cfg;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

json config_echo(const CommonOptions& opt) {
  return json{{"data", opt.data_path},     {"variant", opt.variant},
              {"theta_range", opt.theta_range}, {"grid", opt.grid},
              {"degree", opt.degree},      {"kernel", opt.kernel},
              {"bandwidth", opt.bandwidth}, {"seed", opt.seed},
              {"threads", opt.threads}};
}

void emit(const json& doc, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << doc.dump(2) << "\n";
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write output file: " + out_path);
    out << doc.dump(2) << "\n";
  }
}

std::string swap_extension(const std::string& path, const std::string& ext) {
  const auto slash = path.find_last_of('/');
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + ext;
  return path.substr(0, dot) + ext;
}

void add_estimator_flags(CLI::App* cmd, CommonOptions& opt, bool with_data = true) {
  if (with_data)
    cmd->add_option("--data", opt.data_path, "input dataset CSV (columns x1..xd then y)")
        ->required()
        ->check(CLI::ExistingFile);
  cmd->add_option("--out", opt.out_path, "output path (stdout when omitted)");
  cmd->add_option("--variant", opt.variant, "model variant")
      ->check(CLI::IsMember({"hetero", "homo"}))
      ->envname("SEMITRANS_VARIANT");
  cmd->add_option("--theta-range", opt.theta_range, "search interval lo:hi")
      ->check([](const std::string& s) -> std::string {
        try {
          parse_theta_range(s);
          return {};
        } catch (const std::exception&) {
          return "expected lo:hi with lo <= hi, got '" + s + "'";
        }
      })
      ->envname("SEMITRANS_THETA_RANGE");
  cmd->add_option("--grid", opt.grid, "theta grid points")->check(CLI::PositiveNumber);
  cmd->add_option("--degree", opt.degree, "local polynomial degree")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--kernel", opt.kernel, "kernel family")
      ->check(CLI::IsMember({"gaussian", "epanechnikov"}))
      ->envname("SEMITRANS_KERNEL");
  cmd->add_option("--bandwidth", opt.bandwidth, "bandwidth selection")
      ->check(CLI::IsMember({"plugin", "rot"}))
      ->envname("SEMITRANS_BANDWIDTH");
  cmd->add_option("--seed", opt.seed, "RNG seed")->envname("SEMITRANS_SEED");
  cmd->add_option("--threads", opt.threads, "worker threads (0 = all cores)")
      ->envname("SEMITRANS_THREADS");
}

json bandwidths_json(const semitrans::BandwidthVec& bw) {
  json h = json::array();
  for (Eigen::Index j = 0; j < bw.h.size(); ++j) h.push_back(bw.h[j]);
  return json{{"h", h}, {"g", bw.g}};
}

int run_estimate(const CommonOptions& opt) {
  const auto data = semitrans::read_dataset_csv(opt.data_path);
  const auto cfg = make_estimator_config(opt);
  const auto model = semitrans::fit(data, cfg);

  const Eigen::VectorXd& r = model.residuals;
  const double rm = r.mean();
  const double rsd = std::sqrt((r.array() - rm).square().sum() / static_cast<double>(r.size()));
  json doc{{"command", "estimate"},
           {"version", semitrans::version},
           {"seed", opt.seed},
           {"config", config_echo(opt)},
           {"n", data.n()},
           {"d", data.dim()},
           {"theta_hat", model.theta_hat},
           {"loglik", model.loglik},
           {"bandwidths", bandwidths_json(model.bandwidths)},
           {"residual_summary",
            {{"mean", rm}, {"sd", rsd}, {"min", r.minCoeff()}, {"max", r.maxCoeff()}}}};
  emit(doc, opt.out_path);
  return 0;
}

int run_test_cmd(const CommonOptions& opt, int bootstrap_b, double alpha, const std::string& stat) {
  const auto data = semitrans::read_dataset_csv(opt.data_path);
  const auto cfg = make_estimator_config(opt);
  semitrans::BootstrapConfig boot;
  boot.B = bootstrap_b;
  boot.alpha = alpha;
  boot.variant = cfg.variant;
  boot.seed = opt.seed;
  boot.threads = resolve_threads(opt.threads);
  const auto result = semitrans::run_test(data, cfg, boot);

  json doc{{"command", "test"},
           {"version", semitrans::version},
           {"seed", opt.seed},
           {"config", config_echo(opt)},
           {"stat", stat},
           {"theta_hat", result.theta_hat},
           {"statistics", {{"ks", result.observed.ks}, {"cm", result.observed.cm}}},
           {"bootstrap", {{"B", result.requested_B}, {"failures", result.failures}}},
           {"alpha", result.alpha}};
  if (stat == "ks" || stat == "both") {
    doc["critical_values"]["ks"] = result.critical_ks;
    doc["p_values"]["ks"] = result.pvalue_ks;
    doc["decisions"]["reject_ks"] = result.reject_ks;
  }
  if (stat == "cm" || stat == "both") {
    doc["critical_values"]["cm"] = result.critical_cm;
    doc["p_values"]["cm"] = result.pvalue_cm;
    doc["decisions"]["reject_cm"] = result.reject_cm;
  }
  emit(doc, opt.out_path);
  return 0;
}

int run_simulate(const CommonOptions& opt, int table, int reps, int bootstrap_b,
                 const std::vector<int>& ns, const std::vector<double>& as,
                 const std::vector<double>& nus, const std::vector<double>& etas,
                 const std::vector<double>& skews) {
  semitrans::sim::ExperimentConfig cfg;
  cfg.table = static_cast<semitrans::sim::Table>(table);
  cfg.replications = reps;
  cfg.bootstrap_B = bootstrap_b;
  cfg.sample_sizes = ns;
  cfg.a_values = as;
  cfg.eta_values = etas;
  cfg.seed = opt.seed;
  cfg.threads = resolve_threads(opt.threads);
  cfg.estimator = make_estimator_config(opt);
  if (!nus.empty() || !skews.empty()) {
    const std::vector<double> sk = skews.empty() ? std::vector<double>{0.0} : skews;
    const std::vector<double> nu = nus.empty() ? std::vector<double>{1e6} : nus;
    for (double s : sk)
      for (double v : nu) cfg.model_a_cells.emplace_back(s, v);
  }

  const auto result = semitrans::sim::run_experiment(cfg);

  json rows = json::array();
  for (const auto& row : result.rows) rows.push_back(row);
  json doc{{"command", "simulate"},
           {"version", semitrans::version},
           {"seed", opt.seed},
           {"config", config_echo(opt)},
           {"table", table},
           {"replications", reps},
           {"bootstrap_B", bootstrap_b},
           {"columns", result.columns},
           {"rows", rows}};
  emit(doc, opt.out_path);
  if (!opt.out_path.empty()) {
    semitrans::write_text_file(swap_extension(opt.out_path, ".csv"), result.to_csv());
  } else {
    std::cout << result.to_csv();
  }
  return 0;
}

int run_export_curve(const CommonOptions& opt, double theta, bool theta_given, int grid_points) {
  const auto data = semitrans::read_dataset_csv(opt.data_path);
  const auto cfg = make_estimator_config(opt);
  const auto model = semitrans::fit(data, cfg);
  const double t = theta_given ? theta : model.theta_hat;
  const auto curve = semitrans::sim::export_fit_curve(model, data, t, grid_points);
  if (opt.out_path.empty()) {
    std::cout << curve.to_csv();
  } else {
    semitrans::write_text_file(opt.out_path, curve.to_csv());
    json doc{{"command", "export-curve"},
             {"version", semitrans::version},
             {"theta", t},
             {"theta_hat", model.theta_hat},
             {"rows", data.n()},
             {"out", opt.out_path}};
    std::cout << doc.dump(2) << "\n";
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heteroscedastic semiparametric transformation models: profile likelihood "
               "estimation and bootstrap validity tests"};
  app.require_subcommand(1);
  app.set_version_flag("--version", semitrans::version);

  CommonOptions est_opt;
  auto* estimate = app.add_subcommand("estimate", "fit the transformation model");
  add_estimator_flags(estimate, est_opt);

  CommonOptions test_opt;
  int bootstrap_b = 200;
  double alpha = 0.05;
  std::string stat = "both";
  auto* test = app.add_subcommand("test", "bootstrap validity test");
  add_estimator_flags(test, test_opt);
  test->add_option("--bootstrap", bootstrap_b, "bootstrap replications")
      ->check(CLI::PositiveNumber)
      ->envname("SEMITRANS_BOOTSTRAP");
  test->add_option("--alpha", alpha, "nominal level")
      ->check(CLI::Range(1e-9, 1.0 - 1e-9))
      ->envname("SEMITRANS_ALPHA");
  test->add_option("--stat", stat, "which statistics to report")
      ->check(CLI::IsMember({"ks", "cm", "both"}));

  CommonOptions sim_opt;
  int table = 1;
  int reps = 200;
  int sim_b = 200;
  std::vector<int> ns;
  std::vector<double> as, nus, etas, skews;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo study tables");
  add_estimator_flags(simulate, sim_opt, /*with_data=*/false);
  simulate->add_option("--table", table, "which table to reproduce")
      ->required()
      ->check(CLI::Range(1, 4));
  simulate->add_option("--reps", reps, "replications per cell")->check(CLI::PositiveNumber);
  simulate->add_option("--bootstrap", sim_b, "bootstrap replications per test")
      ->check(CLI::PositiveNumber)
      ->envname("SEMITRANS_BOOTSTRAP");
  simulate->add_option("--n", ns, "sample sizes (default: table grid)");
  simulate->add_option("--a", as, "heteroscedasticity levels (tables 1-2)");
  simulate->add_option("--nu", nus, "skew-t dof (table 3)");
  simulate->add_option("--eta", etas, "chi-squared dof (table 4)");
  simulate->add_option("--skew", skews, "skewness parameters (table 3)");

  CommonOptions curve_opt;
  double curve_theta = 0.0;
  int curve_grid = 200;
  auto* curve = app.add_subcommand("export-curve", "scatter and fitted-curve rows");
  add_estimator_flags(curve, curve_opt);
  auto* theta_opt = curve->add_option("--theta", curve_theta,
                                      "transform parameter for the export (default: theta_hat)");
  curve->add_option("--curve-grid", curve_grid, "fitted-curve grid points")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(estimate)) return run_estimate(est_opt);
    if (app.got_subcommand(test)) return run_test_cmd(test_opt, bootstrap_b, alpha, stat);
    if (app.got_subcommand(simulate))
      return run_simulate(sim_opt, table, reps, sim_b, ns, as, nus, etas, skews);
    if (app.got_subcommand(curve))
      return run_export_curve(curve_opt, curve_theta, theta_opt->count() > 0, curve_grid);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
