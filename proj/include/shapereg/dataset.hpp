#pragma once

#include <Eigen/Core>

#include "shapereg/family.hpp"

namespace shapereg {

// Observations for one fit. `weights` and `trials` may be empty; a present
// `trials` vector gives per-row Binomial trial counts (the response is then
// the success fraction, and each row's likelihood term is weighted by its
// trial count).
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Eigen::VectorXd weights;
  Eigen::VectorXd trials;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index d() const { return X.cols(); }
};

// Throws DataError with the offending row number on support violations,
// non-positive weights, or length mismatches.
void validate_dataset(const Dataset& data, const ExponentialFamily& family);

// Observation weights entering the likelihood: user weights times Binomial
// trial counts when present, defaulting to all ones.
Eigen::VectorXd effective_weights(const Dataset& data, const ExponentialFamily& family);

}  // namespace shapereg
