#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace semitrans {
namespace bandwidth {

namespace detail {

inline double sample_sd(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  if (n < 2) return 0.0;
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(n - 1));
}

//! Type-7 quantile (linear interpolation of order statistics).
inline double quantile(std::vector<double> sorted_or_not, double p) {
  std::sort(sorted_or_not.begin(), sorted_or_not.end());
  const std::size_t n = sorted_or_not.size();
  if (n == 1) return sorted_or_not[0];
  const double pos = p * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= n) return sorted_or_not[n - 1];
  return sorted_or_not[lo] + frac * (sorted_or_not[lo + 1] - sorted_or_not[lo]);
}

inline double iqr(const Eigen::VectorXd& v) {
  std::vector<double> buf(v.data(), v.data() + v.size());
  return quantile(buf, 0.75) - quantile(buf, 0.25);
}

} // namespace detail

//! Silverman-type rule of thumb 0.9 * min(sd, IQR/1.34) * n^(-1/5).
inline double rot_bandwidth(const Eigen::VectorXd& values) {
  const Eigen::Index n = values.size();
  if (n < 2) throw std::invalid_argument("rot_bandwidth: need at least two values");
  if (!values.allFinite()) throw std::invalid_argument("rot_bandwidth: non-finite values");
  const double sd = detail::sample_sd(values);
  const double iqr = detail::iqr(values);
  if (!(sd > 0.0) && !(iqr > 0.0))
    throw std::invalid_argument("rot_bandwidth: degenerate sample (zero spread)");
  const double scale = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * scale * std::pow(static_cast<double>(n), -0.2);
}

namespace detail {

struct BlockedQuarticEstimates {
  double rss = 0.0;
  double theta22 = 0.0;
  double theta24 = 0.0;
};

//! Quartic OLS fits on `blocks` consecutive (in x) chunks of the data.
//! Returns the pooled residual sum of squares and the plug-in functionals
//! theta22 = mean(m''(X_i)^2), theta24 = mean(m''(X_i) m''''(X_i)).
inline BlockedQuarticEstimates blocked_quartic(const std::vector<double>& xs,
                                               const std::vector<double>& zs, int blocks) {
  const int n = static_cast<int>(xs.size());
  BlockedQuarticEstimates out;
  double sum22 = 0.0, sum24 = 0.0;
  for (int b = 0; b < blocks; ++b) {
    const int lo = static_cast<int>(static_cast<long long>(n) * b / blocks);
    const int hi = static_cast<int>(static_cast<long long>(n) * (b + 1) / blocks);
    const int m = hi - lo;
    const double xmin = xs[static_cast<std::size_t>(lo)];
    const double xmax = xs[static_cast<std::size_t>(hi - 1)];
    const double mid = 0.5 * (xmin + xmax);
    const double hw = std::max(0.5 * (xmax - xmin), 1e-300);

    Eigen::MatrixXd basis(m, 5);
    Eigen::VectorXd z(m);
    for (int i = 0; i < m; ++i) {
      const double u = (xs[static_cast<std::size_t>(lo + i)] - mid) / hw;
      double p = 1.0;
      for (int c = 0; c < 5; ++c) {
        basis(i, c) = p;
        p *= u;
      }
      z[i] = zs[static_cast<std::size_t>(lo + i)];
    }
    Eigen::MatrixXd a = basis.transpose() * basis;
    a.diagonal().array() += 1e-12 * a.trace();
    Eigen::VectorXd beta = a.ldlt().solve(basis.transpose() * z);
    const Eigen::VectorXd resid = z - basis * beta;
    out.rss += resid.squaredNorm();

    const double hw2 = hw * hw;
    const double d4 = 24.0 * beta[4] / (hw2 * hw2);
    for (int i = 0; i < m; ++i) {
      const double u = basis(i, 1);
      const double d2 = (2.0 * beta[2] + 6.0 * beta[3] * u + 12.0 * beta[4] * u * u) / hw2;
      sum22 += d2 * d2;
      sum24 += d2 * d4;
    }
  }
  out.theta22 = sum22 / static_cast<double>(n);
  out.theta24 = sum24 / static_cast<double>(n);
  return out;
}

//! Local cubic estimate of m''(x) with a Gaussian kernel (returns 2*b2/g^2).
inline double local_cubic_d2(const std::vector<double>& xs, const std::vector<double>& zs,
                             double at, double g) {
  const int n = static_cast<int>(xs.size());
  Eigen::ArrayXd u(n), z(n);
  for (int i = 0; i < n; ++i) {
    u[i] = (xs[static_cast<std::size_t>(i)] - at) / g;
    z[i] = zs[static_cast<std::size_t>(i)];
  }
  const Eigen::ArrayXd w = (-0.5 * u.square()).exp();
  Eigen::MatrixXd basis(n, 4);
  basis.col(0).setOnes();
  basis.col(1) = u.matrix();
  basis.col(2) = u.square().matrix();
  basis.col(3) = (u * u * u).matrix();
  Eigen::MatrixXd bw = basis.array().colwise() * w;
  Eigen::MatrixXd a = basis.transpose() * bw;
  a.diagonal().array() += 1e-10 * a.trace();
  Eigen::VectorXd beta = a.ldlt().solve(bw.transpose() * z.matrix());
  return 2.0 * beta[2] / (g * g);
}

//! Local linear fit value with a Gaussian kernel.
inline double local_linear_value(const std::vector<double>& xs, const std::vector<double>& zs,
                                 double at, double g) {
  const int n = static_cast<int>(xs.size());
  double s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = (xs[static_cast<std::size_t>(i)] - at) / g;
    const double w = std::exp(-0.5 * u * u);
    s0 += w;
    s1 += w * u;
    s2 += w * u * u;
    t0 += w * zs[static_cast<std::size_t>(i)];
    t1 += w * u * zs[static_cast<std::size_t>(i)];
  }
  const double det = s0 * s2 - s1 * s1;
  if (!(std::abs(det) > 1e-300 * (s0 * s2 + 1e-300))) return s0 > 0 ? t0 / s0 : 0.0;
  return (s2 * t0 - s1 * t1) / det;
}

} // namespace detail

//! Direct plug-in bandwidth for local linear regression with a Gaussian
//! kernel, after Ruppert, Sheather and Wand (1995): blocked quartic pilot
//! fits chosen by Mallows' Cp, a local cubic stage for the curvature
//! functional and a local linear stage for the error variance. Falls back to
//! rot_bandwidth(x) when a pilot functional degenerates (e.g. constant z).
inline double rsw_plugin(const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
  const Eigen::Index n = x.size();
  if (n < 20) throw std::invalid_argument("rsw_plugin: need n >= 20");
  if (z.size() != n) throw std::invalid_argument("rsw_plugin: size mismatch");
  if (!x.allFinite() || !z.allFinite()) throw std::invalid_argument("rsw_plugin: non-finite data");
  if (!(x.maxCoeff() - x.minCoeff() > 0.0))
    throw std::invalid_argument("rsw_plugin: covariate has zero spread");

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) { return x[i] < x[j]; });

  // trim 1% from each end of the x-range
  const int cut = static_cast<int>(std::floor(0.01 * static_cast<double>(n)));
  const int nt = static_cast<int>(n) - 2 * cut;
  std::vector<double> xs(static_cast<std::size_t>(nt)), zs(static_cast<std::size_t>(nt));
  for (int i = 0; i < nt; ++i) {
    xs[static_cast<std::size_t>(i)] = x[order[static_cast<std::size_t>(i + cut)]];
    zs[static_cast<std::size_t>(i)] = z[order[static_cast<std::size_t>(i + cut)]];
  }
  const double a = xs.front();
  const double b = xs.back();
  const double fallback = rot_bandwidth(x);
  if (!(b - a > 0.0)) return fallback;

  // response variation floor: on (near) noise-free or constant data the
  // pilot functionals are rounding crumbs and the plug-in recursion is
  // meaningless
  double zmean = 0.0;
  for (double v : zs) zmean += v;
  zmean /= static_cast<double>(nt);
  double zvar = 0.0;
  for (double v : zs) zvar += (v - zmean) * (v - zmean);
  zvar /= static_cast<double>(nt);
  const double zscale = std::sqrt(zvar) + std::abs(zmean);
  const double span = b - a;
  const double noise_floor = 1e-24 * zscale * zscale;
  if (!(zvar > noise_floor)) return fallback;

  // Mallows' Cp choice of the number of blocks
  const int nmax = std::max(std::min(nt / 20, 5), 1);
  std::vector<double> rss(static_cast<std::size_t>(nmax) + 1, 0.0);
  for (int c = 1; c <= nmax; ++c) rss[static_cast<std::size_t>(c)] = detail::blocked_quartic(xs, zs, c).rss;
  const double sig_ref = rss[static_cast<std::size_t>(nmax)] / std::max(nt - 5 * nmax, 1);
  int nblocks = 1;
  double best_cp = std::numeric_limits<double>::infinity();
  for (int c = 1; c <= nmax; ++c) {
    const double cp = sig_ref > 0.0
                          ? rss[static_cast<std::size_t>(c)] / sig_ref - (nt - 10 * c)
                          : rss[static_cast<std::size_t>(c)];
    if (cp < best_cp) {
      best_cp = cp;
      nblocks = c;
    }
  }

  const auto est = detail::blocked_quartic(xs, zs, nblocks);
  const double sigsq_q = est.rss / std::max(nt - 5 * nblocks, 1);
  if (!(sigsq_q > noise_floor) || !std::isfinite(est.theta24) ||
      !(std::abs(est.theta24) > noise_floor / std::pow(span, 6)))
    return fallback;

  // stage one: bandwidth for the curvature functional
  const double sqrt_pi = std::sqrt(M_PI);
  const double base = sigsq_q * (b - a) / (std::abs(est.theta24) * static_cast<double>(nt));
  const double gamse = est.theta24 < 0.0 ? std::pow(3.0 * base / (8.0 * sqrt_pi), 1.0 / 7.0)
                                         : std::pow(15.0 * base / (16.0 * sqrt_pi), 1.0 / 7.0);
  if (!(gamse > 0.0) || !std::isfinite(gamse)) return fallback;

  // theta22 from a local cubic fit, trimming 5% of the range at each end
  const double lo_lim = a + 0.05 * (b - a);
  const double hi_lim = b - 0.05 * (b - a);
  double sum22 = 0.0;
  for (int i = 0; i < nt; ++i) {
    const double xi = xs[static_cast<std::size_t>(i)];
    if (xi < lo_lim || xi > hi_lim) continue;
    const double d2 = detail::local_cubic_d2(xs, zs, xi, gamse);
    sum22 += d2 * d2;
  }
  const double th22 = sum22 / static_cast<double>(nt);
  if (!(th22 > noise_floor / std::pow(span, 4)) || !std::isfinite(th22)) return fallback;

  // stage two: variance estimate from a local linear fit
  const double c3k_raw = 0.5 + 2.0 * std::sqrt(2.0) - (4.0 / 3.0) * std::sqrt(3.0);
  const double c3k = std::pow(4.0 * c3k_raw / std::sqrt(2.0 * M_PI), 1.0 / 9.0);
  const double lamse =
      c3k * std::pow(sigsq_q * sigsq_q * (b - a) /
                         (th22 * th22 * static_cast<double>(nt) * static_cast<double>(nt)),
                     1.0 / 9.0);
  if (!(lamse > 0.0) || !std::isfinite(lamse)) return fallback;

  double rss_ll = 0.0;
  for (int i = 0; i < nt; ++i) {
    const double fitv = detail::local_linear_value(xs, zs, xs[static_cast<std::size_t>(i)], lamse);
    const double r = zs[static_cast<std::size_t>(i)] - fitv;
    rss_ll += r * r;
  }
  const double sigsq = rss_ll / static_cast<double>(nt);
  if (!(sigsq > noise_floor)) return fallback;

  const double h = std::pow(sigsq * (b - a) / (2.0 * sqrt_pi * th22 * static_cast<double>(nt)), 0.2);
  if (!(h > 0.0) || !std::isfinite(h)) return fallback;
  return h;
}

//! Coordinate-wise RSW plug-in for d >= 1 covariates.
inline Eigen::VectorXd rsw_plugin_multi(const Eigen::MatrixXd& x, const Eigen::VectorXd& z) {
  Eigen::VectorXd h(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) h[j] = rsw_plugin(x.col(j), z);
  return h;
}

namespace detail {

struct PairCounts {
  double width = 0.0;
  std::vector<double> cnt; // cnt[m] = number of pairs at binned distance m
  int n = 0;
};

inline PairCounts binned_pairs(const Eigen::VectorXd& v, int nb) {
  PairCounts pc;
  pc.n = static_cast<int>(v.size());
  const double xmin = v.minCoeff();
  const double xmax = v.maxCoeff();
  const double rang = (xmax - xmin) * 1.01;
  pc.width = rang / static_cast<double>(nb);
  std::vector<double> bins(static_cast<std::size_t>(nb), 0.0);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    int k = static_cast<int>((v[i] - xmin) / pc.width);
    k = std::clamp(k, 0, nb - 1);
    bins[static_cast<std::size_t>(k)] += 1.0;
  }
  pc.cnt.assign(static_cast<std::size_t>(nb), 0.0);
  for (int k = 0; k < nb; ++k) pc.cnt[0] += bins[static_cast<std::size_t>(k)] * (bins[static_cast<std::size_t>(k)] - 1.0) / 2.0;
  for (int m = 1; m < nb; ++m) {
    double s = 0.0;
    for (int k = 0; k + m < nb; ++k) s += bins[static_cast<std::size_t>(k)] * bins[static_cast<std::size_t>(k + m)];
    pc.cnt[static_cast<std::size_t>(m)] = s;
  }
  return pc;
}

inline double phi4_binned(const PairCounts& pc, double h) {
  double sum = 0.0;
  for (std::size_t m = 0; m < pc.cnt.size(); ++m) {
    const double x = static_cast<double>(m) * pc.width / h;
    const double delta = x * x;
    if (delta >= 1000.0) break;
    sum += std::exp(-0.5 * delta) * (delta * delta - 6.0 * delta + 3.0) * pc.cnt[m];
  }
  const double n = pc.n;
  sum = 2.0 * sum + n * 3.0;
  return sum / (n * (n - 1.0) * std::pow(h, 5.0) * std::sqrt(2.0 * M_PI));
}

inline double phi6_binned(const PairCounts& pc, double h) {
  double sum = 0.0;
  for (std::size_t m = 0; m < pc.cnt.size(); ++m) {
    const double x = static_cast<double>(m) * pc.width / h;
    const double delta = x * x;
    if (delta >= 1000.0) break;
    sum += std::exp(-0.5 * delta) *
           (delta * delta * delta - 15.0 * delta * delta + 45.0 * delta - 15.0) * pc.cnt[m];
  }
  const double n = pc.n;
  sum = 2.0 * sum - n * 15.0;
  return sum / (n * (n - 1.0) * std::pow(h, 7.0) * std::sqrt(2.0 * M_PI));
}

} // namespace detail

//! Sheather-Jones solve-the-equation bandwidth for Gaussian-kernel density
//! estimation, with binned pair counts. Falls back to rot_bandwidth when a
//! pilot functional is not usable.
inline double sj_plugin(const Eigen::VectorXd& values) {
  const Eigen::Index n_ = values.size();
  if (n_ < 20) throw std::invalid_argument("sj_plugin: need n >= 20");
  if (!values.allFinite()) throw std::invalid_argument("sj_plugin: non-finite values");
  const double sd = detail::sample_sd(values);
  const double iqr = detail::iqr(values);
  if (!(sd > 0.0) && !(iqr > 0.0))
    throw std::invalid_argument("sj_plugin: degenerate sample (zero spread)");

  const double n = static_cast<double>(n_);
  const double fallback = rot_bandwidth(values);
  const double scale = iqr > 0.0 ? std::min(sd, iqr / 1.349) : sd;
  if (!(scale > 0.0)) return fallback;

  const auto pc = detail::binned_pairs(values, 1000);
  const double a = 1.24 * scale * std::pow(n, -1.0 / 7.0);
  const double b = 1.23 * scale * std::pow(n, -1.0 / 9.0);
  const double td = -detail::phi6_binned(pc, b);
  const double sda = detail::phi4_binned(pc, a);
  if (!(td > 0.0) || !(sda > 0.0) || !std::isfinite(td) || !std::isfinite(sda)) return fallback;

  const double alph2 = 1.357 * std::pow(sda / td, 1.0 / 7.0);
  const double c1 = 1.0 / (2.0 * std::sqrt(M_PI) * n);
  auto fsd = [&](double h) {
    const double p4 = detail::phi4_binned(pc, alph2 * std::pow(h, 5.0 / 7.0));
    if (!(p4 > 0.0)) return 1.0; // density functional vanished: estimate > h
    return std::pow(c1 / p4, 0.2) - h;
  };

  const double hmax = 1.144 * (sd > 0.0 ? sd : scale) * std::pow(n, -0.2);
  double lo = 0.1 * hmax;
  double hi = hmax;
  int tries = 0;
  while (fsd(lo) * fsd(hi) > 0.0) {
    if (++tries > 99) return fallback;
    if (tries % 2 == 1)
      hi *= 1.2;
    else
      lo /= 1.2;
  }
  double flo = fsd(lo);
  for (int it = 0; it < 200 && hi - lo > 1e-9 * scale; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fmid = fsd(mid);
    if (flo * fmid <= 0.0) {
      hi = mid;
    } else {
      lo = mid;
      flo = fmid;
    }
  }
  const double g = 0.5 * (lo + hi);
  return (g > 0.0 && std::isfinite(g)) ? g : fallback;
}

} // namespace bandwidth
} // namespace semitrans
