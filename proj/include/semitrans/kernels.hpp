#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace semitrans {

enum class KernelSpec { gaussian, epanechnikov };

inline constexpr double inv_sqrt_2pi = 0.3989422804014326779;

inline double kernel_eval(KernelSpec spec, double u) {
  if (!std::isfinite(u)) throw std::domain_error("kernel_eval: non-finite input");
  switch (spec) {
    case KernelSpec::gaussian:
      return inv_sqrt_2pi * std::exp(-0.5 * u * u);
    case KernelSpec::epanechnikov:
      return std::abs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
  }
  throw std::domain_error("kernel_eval: unknown kernel");
}

//! Regression bandwidth vector h (one entry per covariate) and the residual
//! density bandwidth g.
struct BandwidthVec {
  Eigen::VectorXd h;
  double g = 0.0;

  void validate() const {
    if (h.size() == 0) throw std::invalid_argument("BandwidthVec: empty h");
    for (Eigen::Index j = 0; j < h.size(); ++j)
      if (!(h[j] > 0.0) || !std::isfinite(h[j]))
        throw std::invalid_argument("BandwidthVec: h entries must be positive and finite");
    if (!(g > 0.0) || !std::isfinite(g))
      throw std::invalid_argument("BandwidthVec: g must be positive and finite");
  }
};

} // namespace semitrans
