#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <utility>

namespace semitrans {

//! n observations of a d-dimensional covariate and a scalar response.
struct Dataset {
  Eigen::MatrixXd x; // n x d
  Eigen::VectorXd y; // n

  Dataset() = default;
  Dataset(Eigen::MatrixXd covariates, Eigen::VectorXd response)
      : x(std::move(covariates)), y(std::move(response)) {
    validate();
  }

  Eigen::Index n() const { return x.rows(); }
  Eigen::Index dim() const { return x.cols(); }

  void validate() const {
    if (x.rows() < 1) throw std::invalid_argument("Dataset: need at least one observation");
    if (x.cols() < 1) throw std::invalid_argument("Dataset: need at least one covariate");
    if (y.size() != x.rows()) throw std::invalid_argument("Dataset: covariate/response size mismatch");
    if (!x.allFinite() || !y.allFinite()) throw std::invalid_argument("Dataset: non-finite entries");
  }
};

} // namespace semitrans
