#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "shapereg/active_set.hpp"
#include "shapereg/index_model.hpp"

namespace shapereg {

inline constexpr int kModelSchemaVersion = 1;
inline constexpr const char* kVersion = "0.1.0";

struct ModelMetadata {
  std::int64_t n = 0;
  int d = 0;
  int m = 0;  // 0 for additive models
  std::uint64_t seed = 0;
  double eps_irls = 1e-8;
  double eta_cap = 30.0;
  bool converged = false;
  double loglik = 0.0;
  int iterations = 0;
  std::string version = kVersion;
};

// A fitted model ready for prediction and serialization. For the index kind
// the components live on the projected coordinates z = A^T x.
struct FittedModel {
  enum class Kind { Additive, Index };
  Kind kind = Kind::Additive;
  ExponentialFamily family;
  ShapeVector shapes;  // per covariate (additive) or per ridge (index)
  double intercept = 0.0;
  std::vector<ComponentFit> components;
  Eigen::MatrixXd index_matrix;  // d x m, index kind only
  double delta = 0.0;
  ModelMetadata metadata;

  static FittedModel from_additive(const AdditiveFit& fit, const ShapeVector& shapes,
                                   const ExponentialFamily& family, const SolverOptions& opts,
                                   std::uint64_t seed);
  static FittedModel from_index(const IndexFit& fit, const ShapeVector& ridge_shapes,
                                const ExponentialFamily& family, const SolverOptions& opts,
                                std::uint64_t seed);
};

// Linear predictors at new covariates. Throws DimensionError when Xnew has
// the wrong number of columns.
Eigen::VectorXd predict_eta(const FittedModel& model, const Eigen::MatrixXd& Xnew);

// Mean-scale predictions: inv_link applied elementwise to predict_eta.
Eigen::VectorXd predict_mean(const FittedModel& model, const Eigen::MatrixXd& Xnew);

struct Prediction {
  Eigen::VectorXd eta;
  Eigen::VectorXd mean;
  std::vector<std::uint8_t> saturated;
};
Prediction predict(const FittedModel& model, const Eigen::MatrixXd& Xnew);

// JSON text; numbers round-trip to the exact same doubles.
std::string save_model(const FittedModel& model);
// Throws ModelIoError on corrupt payloads or a newer schema version.
FittedModel load_model(const std::string& bytes);

void save_model_file(const FittedModel& model, const std::filesystem::path& path);
FittedModel load_model_file(const std::filesystem::path& path);

}  // namespace shapereg
