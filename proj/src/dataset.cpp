#include "shapereg/dataset.hpp"

#include <cmath>
#include <string>

#include "shapereg/errors.hpp"

namespace shapereg {

void validate_dataset(const Dataset& data, const ExponentialFamily& family) {
  const Eigen::Index n = data.n();
  if (n == 0) throw DataError("empty dataset");
  if (data.y.size() != n)
    throw DataError("response length " + std::to_string(data.y.size()) +
                    " != covariate rows " + std::to_string(n));
  if (data.weights.size() != 0 && data.weights.size() != n)
    throw DataError("weights length mismatch");
  if (data.trials.size() != 0 && data.trials.size() != n)
    throw DataError("trials length mismatch");

  for (Eigen::Index i = 0; i < n; ++i) {
    if (data.weights.size() && !(data.weights[i] > 0.0))
      throw DataError("non-positive weight at row " + std::to_string(i + 1));
    for (Eigen::Index j = 0; j < data.d(); ++j)
      if (!std::isfinite(data.X(i, j)))
        throw DataError("non-finite covariate at row " + std::to_string(i + 1));

    if (family.kind == Family::Binomial && data.trials.size()) {
      const double t = data.trials[i];
      if (!(t >= 1.0) || std::abs(t - std::round(t)) > 1e-8)
        throw DataError("invalid trial count at row " + std::to_string(i + 1));
      const double s = data.y[i] * t;
      if (data.y[i] < -1e-12 || data.y[i] > 1.0 + 1e-12 ||
          std::abs(s - std::round(s)) > 1e-6)
        throw DataError("binomial: response " + std::to_string(data.y[i]) + " at row " +
                        std::to_string(i + 1) + " is not a multiple of 1/trials");
    } else if (!family.supports(data.y[i])) {
      throw DataError(family.name() + ": response " + std::to_string(data.y[i]) +
                      " at row " + std::to_string(i + 1) + " outside the family support");
    }
  }
}

Eigen::VectorXd effective_weights(const Dataset& data, const ExponentialFamily& family) {
  const Eigen::Index n = data.n();
  Eigen::VectorXd w = data.weights.size() ? data.weights : Eigen::VectorXd::Ones(n);
  if (family.kind == Family::Binomial && data.trials.size()) w = w.cwiseProduct(data.trials);
  return w;
}

}  // namespace shapereg
