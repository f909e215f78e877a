#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "shapereg/dataset.hpp"
#include "shapereg/index_model.hpp"
#include "shapereg/model.hpp"

namespace shapereg {

using TruthFn = std::function<double(std::span<const double>)>;

// One synthetic benchmark instance: covariates uniform on [-1,1]^d,
// responses drawn from the requested family around the problem's prediction
// function. Problems 1-3 are additive (Gaussian/Poisson/Binomial); 4-5 are
// index problems (Gaussian only).
struct ProblemData {
  Dataset data;
  ShapeVector shapes;  // covariate shapes (1-3) or ridge shapes (4-5)
  int d = 0;
  int m = 0;  // 0 for the additive problems
  TruthFn truth;
  Eigen::MatrixXd A0;  // true index matrix, index problems only
};

// Throws std::invalid_argument on an unknown id or an id/family pairing the
// benchmark does not define. Identical seeds give identical datasets.
ProblemData gen_problem(int id, Family family, int n, std::uint64_t seed);

struct MiseEstimate {
  double mean_squared_error = 0.0;  // plain Monte Carlo average of (fhat-f0)^2
  double integral = 0.0;            // times the evaluation-cube volume 1.96^d
};

// Monte Carlo on n_mc uniform draws from [-0.98, 0.98]^d.
MiseEstimate estimate_mise(const FittedModel& model, const TruthFn& truth, int d, int n_mc,
                           std::uint64_t seed);

// Mean over `reps` random train/validation splits of the root mean squared
// prediction error on the mean scale.
double rmspe_split_eval(const Dataset& data,
                        const std::function<FittedModel(const Dataset&)>& fitter,
                        double train_frac, int reps, std::uint64_t seed);

// sqrt(mean ||alpha - alpha0||_2^2) for single-index fits. Labels whose
// ridge can absorb a reflection are compared against the better of +-alpha0.
double index_rmse(std::span<const Eigen::VectorXd> alphas, const Eigen::VectorXd& alpha0,
                  Shape ridge_shape);

struct SimulationConfig {
  int problem = 1;
  Family family = Family::Gaussian;
  int n = 500;
  int reps = 10;
  int n_mc = 20000;
  std::uint64_t seed = 1;
  int searches = 100;   // index problems
  double delta = 0.0;   // 0 = automatic
  bool refine = false;
  SolverOptions solver;
};

struct SimulationRow {
  int problem;
  std::string family;
  int n;
  int rep;           // 1-based
  std::string metric;
  double value;
  double seconds;
};

// Replications run in parallel on independent seed-derived streams.
std::vector<SimulationRow> run_simulation(const SimulationConfig& config);

std::string simulation_csv(std::span<const SimulationRow> rows);
// Per-metric mean/median/min/max summary as a JSON document.
std::string simulation_summary(std::span<const SimulationRow> rows);

}  // namespace shapereg
