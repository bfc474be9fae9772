#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace semitrans {

//! Yeo-Johnson transformation family.
//!
//! For parameter theta the transform of y is
//!     y >= 0:  ((y+1)^theta - 1) / theta        (log(y+1) at theta = 0)
//!     y <  0:  -((1-y)^(2-theta) - 1)/(2-theta) (-log(1-y) at theta = 2)
//! Strictly increasing and twice differentiable in y for every theta,
//! identity at theta = 1. The log branches are taken whenever |theta|
//! (resp. |theta-2|) < yj_seam_tol; with expm1/log1p arithmetic the two
//! branches agree to machine precision across the seam.

inline constexpr double yj_seam_tol = 1e-8;

namespace detail {

inline void require_finite(double theta, double v, const char* fn) {
  if (!std::isfinite(theta) || !std::isfinite(v))
    throw std::domain_error(std::string(fn) + ": non-finite input");
}

} // namespace detail

inline double yj_value(double theta, double y) {
  detail::require_finite(theta, y, "yj_value");
  if (y >= 0.0) {
    const double u = std::log1p(y);
    if (std::abs(theta) < yj_seam_tol) return u;
    return std::expm1(theta * u) / theta;
  }
  const double v = std::log1p(-y);
  const double s = 2.0 - theta;
  if (std::abs(s) < yj_seam_tol) return -v;
  return -std::expm1(s * v) / s;
}

//! d/dy of yj_value: (y+1)^(theta-1) for y >= 0, (1-y)^(1-theta) for y < 0.
inline double yj_deriv_y(double theta, double y) {
  detail::require_finite(theta, y, "yj_deriv_y");
  if (y >= 0.0) return std::exp((theta - 1.0) * std::log1p(y));
  return std::exp((1.0 - theta) * std::log1p(-y));
}

//! d/dtheta of yj_value, with the removable singularities at theta = 0
//! (y >= 0) and theta = 2 (y < 0) filled by their series limits.
inline double yj_grad_theta(double theta, double y) {
  detail::require_finite(theta, y, "yj_grad_theta");
  // For y >= 0 write u = log1p(y), t = theta*u; the derivative is
  // (t e^t - e^t + 1)/theta^2 = u^2 (1/2 + t/3 + t^2/8 + t^3/30 + ...).
  // The y < 0 branch has the same form in v = log1p(-y), s = 2 - theta
  // (the sign from d/dtheta = -d/ds cancels the leading minus).
  const double u = (y >= 0.0) ? std::log1p(y) : std::log1p(-y);
  const double c = (y >= 0.0) ? theta : 2.0 - theta;
  const double t = c * u;
  if (std::abs(t) < 1e-4) {
    return u * u * (0.5 + t / 3.0 + t * t / 8.0 + t * t * t / 30.0);
  }
  const double e = std::exp(t);
  return (t * e - e + 1.0) / (c * c);
}

//! True when z lies in the range of yj_value(theta, .).
inline bool yj_in_range(double theta, double z) {
  if (!std::isfinite(theta) || !std::isfinite(z)) return false;
  if (z >= 0.0) {
    if (std::abs(theta) < yj_seam_tol) return true;
    return theta * z + 1.0 > 0.0;
  }
  const double s = 2.0 - theta;
  if (std::abs(s) < yj_seam_tol) return true;
  return 1.0 - s * z > 0.0;
}

inline double yj_inverse(double theta, double z) {
  detail::require_finite(theta, z, "yj_inverse");
  if (z >= 0.0) {
    if (std::abs(theta) < yj_seam_tol) return std::expm1(z);
    const double w = theta * z + 1.0;
    if (w <= 0.0)
      throw std::range_error("yj_inverse: z = " + std::to_string(z) +
                             " outside the range of the transform (theta*z+1 = " +
                             std::to_string(w) + " <= 0 on the z >= 0 branch)");
    return std::expm1(std::log(w) / theta);
  }
  const double s = 2.0 - theta;
  if (std::abs(s) < yj_seam_tol) return -std::expm1(-z);
  const double w = 1.0 - s * z;
  if (w <= 0.0)
    throw std::range_error("yj_inverse: z = " + std::to_string(z) +
                           " outside the range of the transform (1-(2-theta)*z = " +
                           std::to_string(w) + " <= 0 on the z < 0 branch)");
  return -std::expm1(std::log(w) / s);
}

} // namespace semitrans
