#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "semitrans/kernels.hpp"

namespace semitrans {

//! Kernel density estimator f(y) = (1/(n g)) sum_i l((x_i - y)/g).
class KernelDensity {
 public:
  KernelDensity(Eigen::VectorXd samples, double bandwidth, KernelSpec kernel)
      : samples_(std::move(samples)), g_(bandwidth), kernel_(kernel) {
    if (samples_.size() < 1) throw std::invalid_argument("kde: empty sample");
    if (!(g_ > 0.0) || !std::isfinite(g_)) throw std::invalid_argument("kde: bandwidth must be positive");
    if (!samples_.allFinite()) throw std::invalid_argument("kde: non-finite sample");
  }

  const Eigen::VectorXd& samples() const { return samples_; }
  double bandwidth() const { return g_; }
  KernelSpec kernel() const { return kernel_; }

  double operator()(double y) const {
    const Eigen::Index n = samples_.size();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      sum += kernel_eval(kernel_, (samples_[i] - y) / g_);
    return sum / (static_cast<double>(n) * g_);
  }

  Eigen::VectorXd evaluate_at(const Eigen::VectorXd& points) const {
    const Eigen::Index n = samples_.size();
    const Eigen::Index m = points.size();
    Eigen::VectorXd out(m);
    const double norm = 1.0 / (static_cast<double>(n) * g_);
    if (kernel_ == KernelSpec::gaussian) {
      Eigen::ArrayXd work(n);
      for (Eigen::Index j = 0; j < m; ++j) {
        work = (samples_.array() - points[j]) / g_;
        out[j] = norm * inv_sqrt_2pi * (-0.5 * work.square()).exp().sum();
      }
    } else {
      for (Eigen::Index j = 0; j < m; ++j) out[j] = (*this)(points[j]);
    }
    return out;
  }

 private:
  Eigen::VectorXd samples_;
  double g_;
  KernelSpec kernel_;
};

inline KernelDensity kde_fit(Eigen::VectorXd residuals, double bandwidth, KernelSpec kernel) {
  return KernelDensity(std::move(residuals), bandwidth, kernel);
}

} // namespace semitrans
