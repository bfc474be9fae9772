#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "semitrans/kernels.hpp"

namespace semitrans {

//! Multivariate local polynomial regression with a product kernel.
//!
//! The fit at x is the intercept of the weighted least squares polynomial of
//! total degree p in the scaled offsets (X_i - x)/h, with weights
//! prod_j k((X_ij - x_j)/h_j). The intercept is linear in the responses, so
//! evaluation is exposed through the equivalent-kernel weight vector w(x)
//! with m(x) = w(x) . z. At points where the weighted normal equations are
//! singular a ridge of 1e-10 * trace is added; if the solve still fails the
//! fit falls back to the local constant (Nadaraya-Watson) estimate there.
class LocalPolynomialFit {
 public:
  LocalPolynomialFit(Eigen::MatrixXd x, Eigen::VectorXd z, int degree,
                     Eigen::VectorXd bandwidths, KernelSpec kernel)
      : x_(std::move(x)),
        z_(std::move(z)),
        degree_(degree),
        h_(std::move(bandwidths)),
        kernel_(kernel) {
    const Eigen::Index n = x_.rows();
    const Eigen::Index d = x_.cols();
    if (n == 0 || z_.size() == 0) throw std::invalid_argument("locpoly: empty data");
    if (z_.size() != n) throw std::invalid_argument("locpoly: covariate/response size mismatch");
    if (d == 0) throw std::invalid_argument("locpoly: zero-dimensional covariates");
    if (degree_ < 0) throw std::invalid_argument("locpoly: negative degree");
    if (h_.size() != d) throw std::invalid_argument("locpoly: bandwidth dimension mismatch");
    for (Eigen::Index j = 0; j < d; ++j)
      if (!(h_[j] > 0.0) || !std::isfinite(h_[j]))
        throw std::invalid_argument("locpoly: bandwidths must be positive and finite");
    if (!x_.allFinite() || !z_.allFinite())
      throw std::invalid_argument("locpoly: non-finite data");
    exponents_ = make_exponents(static_cast<int>(d), degree_);
    if (n <= static_cast<Eigen::Index>(exponents_.size()))
      throw std::invalid_argument("locpoly: need more observations than polynomial coefficients");
  }

  Eigen::Index n() const { return x_.rows(); }
  Eigen::Index dim() const { return x_.cols(); }
  int degree() const { return degree_; }
  const Eigen::MatrixXd& covariates() const { return x_; }
  const Eigen::VectorXd& responses() const { return z_; }
  const Eigen::VectorXd& bandwidths() const { return h_; }
  KernelSpec kernel() const { return kernel_; }

  //! Equivalent-kernel weights w with m(x) = w . z.
  Eigen::VectorXd weights(const Eigen::VectorXd& at) const {
    if (at.size() != x_.cols()) throw std::invalid_argument("locpoly: evaluation point dimension mismatch");
    const Eigen::Index n = x_.rows();
    const Eigen::Index d = x_.cols();
    const std::size_t q = exponents_.size();

    Eigen::MatrixXd u(n, d);
    for (Eigen::Index j = 0; j < d; ++j)
      u.col(j) = (x_.col(j).array() - at[j]) / h_[j];

    Eigen::VectorXd w(n);
    if (kernel_ == KernelSpec::gaussian) {
      w = (-0.5 * u.array().square().rowwise().sum()).exp();
    } else {
      for (Eigen::Index i = 0; i < n; ++i) {
        double prod = 1.0;
        for (Eigen::Index j = 0; j < d; ++j) {
          const double uj = u(i, j);
          if (std::abs(uj) > 1.0) { prod = 0.0; break; }
          prod *= 0.75 * (1.0 - uj * uj);
        }
        w[i] = prod;
      }
    }

    const double wsum = w.sum();
    if (!(wsum > 0.0)) {
      std::ostringstream msg;
      msg << "locpoly: all kernel weights vanish at x = (";
      for (Eigen::Index j = 0; j < d; ++j) msg << (j ? ", " : "") << at[j];
      msg << ")";
      throw std::runtime_error(msg.str());
    }

    if (q == 1) return w / wsum; // local constant

    Eigen::MatrixXd basis(n, static_cast<Eigen::Index>(q));
    basis.col(0).setOnes();
    for (std::size_t t = 1; t < q; ++t) {
      Eigen::VectorXd col = Eigen::VectorXd::Ones(n);
      for (Eigen::Index j = 0; j < d; ++j)
        for (int rep = 0; rep < exponents_[t][static_cast<std::size_t>(j)]; ++rep)
          col.array() *= u.col(j).array();
      basis.col(static_cast<Eigen::Index>(t)) = col;
    }

    Eigen::MatrixXd bw = basis.array().colwise() * w.array();
    Eigen::MatrixXd a = basis.transpose() * bw;
    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q));
    e0[0] = 1.0;

    auto solves_well = [&](const Eigen::MatrixXd& mat, const Eigen::VectorXd& coef, double tol) {
      if (!coef.allFinite()) return false;
      const double resid = (mat * coef - e0).cwiseAbs().maxCoeff();
      return resid <= tol * (mat.cwiseAbs().maxCoeff() * coef.cwiseAbs().maxCoeff() + 1.0);
    };

    Eigen::LDLT<Eigen::MatrixXd> solver(a);
    Eigen::VectorXd coef = solver.solve(e0);
    if (solver.info() == Eigen::Success && solves_well(a, coef, 1e-8)) return bw * coef;

    // singular local design: ridge the normal equations, then local constant
    Eigen::MatrixXd ridged = a;
    ridged.diagonal().array() += 1e-10 * a.trace();
    Eigen::LDLT<Eigen::MatrixXd> ridge_solver(ridged);
    coef = ridge_solver.solve(e0);
    if (ridge_solver.info() == Eigen::Success && solves_well(ridged, coef, 1e-6))
      return bw * coef;
    return w / wsum;
  }

  double evaluate(const Eigen::VectorXd& at) const { return weights(at).dot(z_); }

  double evaluate(double at) const {
    Eigen::VectorXd p(1);
    p[0] = at;
    return evaluate(p);
  }

  //! Rows are the equivalent-kernel weights at each given point.
  Eigen::MatrixXd smoother_matrix(const Eigen::MatrixXd& points) const {
    if (points.cols() != x_.cols())
      throw std::invalid_argument("locpoly: evaluation point dimension mismatch");
    Eigen::MatrixXd s(points.rows(), x_.rows());
    for (Eigen::Index i = 0; i < points.rows(); ++i)
      s.row(i) = weights(points.row(i).transpose()).transpose();
    return s;
  }

  static std::vector<std::vector<int>> make_exponents(int d, int degree) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(static_cast<std::size_t>(d), 0);
    // graded order: total degree 0, 1, ..., p
    for (int total = 0; total <= degree; ++total) emit(d, total, 0, cur, out);
    return out;
  }

 private:
  static void emit(int d, int remaining, int pos, std::vector<int>& cur,
                   std::vector<std::vector<int>>& out) {
    if (pos == d - 1) {
      cur[static_cast<std::size_t>(pos)] = remaining;
      out.push_back(cur);
      return;
    }
    for (int e = remaining; e >= 0; --e) {
      cur[static_cast<std::size_t>(pos)] = e;
      emit(d, remaining - e, pos + 1, cur, out);
    }
  }

  Eigen::MatrixXd x_;
  Eigen::VectorXd z_;
  int degree_;
  Eigen::VectorXd h_;
  KernelSpec kernel_;
  std::vector<std::vector<int>> exponents_;
};

inline LocalPolynomialFit locpoly_fit(Eigen::MatrixXd x, Eigen::VectorXd z, int degree,
                                      Eigen::VectorXd bandwidths, KernelSpec kernel) {
  return LocalPolynomialFit(std::move(x), std::move(z), degree, std::move(bandwidths), kernel);
}

//! Conditional mean and scale estimated from the same local fits:
//! sigma^2(x) = max(s(x) - m(x)^2, floor) where s is the local polynomial fit
//! of the squared responses and floor = max(1e-4 * var_n(z), 1e-12).
class VarianceFit {
 public:
  VarianceFit(LocalPolynomialFit mean_fit, LocalPolynomialFit square_fit, double variance_floor)
      : mean_fit_(std::move(mean_fit)),
        square_fit_(std::move(square_fit)),
        floor_(variance_floor) {}

  const LocalPolynomialFit& mean_fit() const { return mean_fit_; }
  const LocalPolynomialFit& square_fit() const { return square_fit_; }
  double variance_floor() const { return floor_; }

  //! (m(x), s(x)) from one weight computation; the fits share X, h, kernel.
  std::pair<double, double> moments(const Eigen::VectorXd& at) const {
    const Eigen::VectorXd w = mean_fit_.weights(at);
    return {w.dot(mean_fit_.responses()), w.dot(square_fit_.responses())};
  }

  double mean(const Eigen::VectorXd& at) const { return mean_fit_.evaluate(at); }
  double sigma2(const Eigen::VectorXd& at) const {
    const auto [m, s] = moments(at);
    return std::max(s - m * m, floor_);
  }
  double sigma(const Eigen::VectorXd& at) const { return std::sqrt(sigma2(at)); }

  double mean(double at) const { return mean_fit_.evaluate(at); }
  double sigma(double at) const {
    Eigen::VectorXd p(1);
    p[0] = at;
    return sigma(p);
  }

 private:
  LocalPolynomialFit mean_fit_;
  LocalPolynomialFit square_fit_;
  double floor_;
};

inline double variance_floor_for(const Eigen::VectorXd& z) {
  const double mean = z.mean();
  const double var = (z.array() - mean).square().sum() / static_cast<double>(z.size());
  return std::max(1e-4 * var, 1e-12);
}

inline VarianceFit cond_variance_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& z,
                                     int degree, const Eigen::VectorXd& bandwidths,
                                     KernelSpec kernel) {
  LocalPolynomialFit m(x, z, degree, bandwidths, kernel);
  LocalPolynomialFit s(x, z.array().square().matrix(), degree, bandwidths, kernel);
  return VarianceFit(std::move(m), std::move(s), variance_floor_for(z));
}

} // namespace semitrans
