#pragma once

#include <Eigen/Core>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "shapereg/dataset.hpp"
#include "shapereg/family.hpp"
#include "shapereg/shape.hpp"

namespace shapereg {

struct SolverOptions {
  double eps_irls = 1e-8;
  // 0 = automatic: 2 * n * (#non-linear coordinates), capped at 10000.
  int max_outer_iters = 0;
  int max_irls_iters = 100;
  // Poisson/Binomial linear predictors are clamped at +-eta_cap inside the
  // solver; fitted values beyond it are flagged as saturated.
  double eta_cap = 30.0;

  int resolved_max_outer(Eigen::Index n, int n_nonlinear) const;
};

// One basis element: the slope of a linear coordinate (knot == kLinearKnot)
// or the `knot`-th knotted basis function of coordinate `coord`.
inline constexpr int kLinearKnot = -1;
struct BasisElement {
  int coord = 0;
  int knot = kLinearKnot;
  friend bool operator==(const BasisElement&, const BasisElement&) = default;
};

// Basis elements currently allowed a nonzero weight. The intercept is
// implicit and always present. Elements of the initial set (linear slopes
// and the sign-free first knot of convex/concave coordinates) are never
// dropped.
struct WorkingSet {
  std::vector<BasisElement> members;

  bool contains(const BasisElement& e) const;
  // Sign-constrained members are everything outside the initial set.
  bool constrained(std::size_t idx, const ShapeVector& shapes) const;
};

WorkingSet initial_working_set(const ShapeVector& shapes);

struct AdditiveFit {
  std::vector<ComponentFit> components;
  double intercept = 0.0;
  Eigen::VectorXd fitted_eta;            // raw linear predictors at the data
  std::vector<std::uint8_t> saturated;   // |eta| >= eta_cap (Poisson/Binomial)
  double loglik = 0.0;                   // objective at the returned weights
  int iterations = 0;                    // outer iterations
  bool converged = false;
  std::vector<double> objective_history;
  std::vector<std::string> warnings;

  double eval(std::span<const double> x) const;  // intercept + sum of components
};

// Inner solver failed to make progress even with step halving.
struct ConvergenceError : std::runtime_error {
  std::shared_ptr<AdditiveFit> partial;
  explicit ConvergenceError(const std::string& msg,
                            std::shared_ptr<AdditiveFit> partial_fit = nullptr)
      : std::runtime_error(msg), partial(std::move(partial_fit)) {}
};

struct IrlsResult {
  Eigen::VectorXd w;  // [intercept, members...] in working-set order
  int iterations = 0;
  bool rank_deficient = false;
  bool hit_max_iters = false;
};

// Unconstrained maximisation of the working-set-restricted scaled
// log-likelihood. Gaussian is solved exactly in one weighted least-squares
// step; the other families run Newton-Raphson with step halving until the
// gradient sup-norm falls below eps_irls.
IrlsResult irls_solve(const Dataset& data, const ExponentialFamily& family,
                      const BasisSet& basis, const WorkingSet& working,
                      const Eigen::VectorXd& warm, const SolverOptions& opts = {});

// d(scaled loglik)/dw for every knotted basis element, coordinate by
// coordinate in O(n) each via cumulative-residual recurrences.
// weighted_resid[i] = w_i * (y_i - mu_i). Linear coordinates get an empty
// vector (their slopes live in the initial working set).
std::vector<std::vector<double>> compute_derivatives(const Eigen::VectorXd& weighted_resid,
                                                     const BasisSet& basis);

struct MovingRatio {
  double p = 1.0;
  std::vector<std::size_t> drop;  // indices into working.members
};

// Blend factor and drop set for working-set refinement. `w_star`/`w_new`
// hold member weights only (no intercept), aligned with working.members.
// Throws std::logic_error when no constrained member violates the cone.
MovingRatio moving_ratio(const Eigen::VectorXd& w_star, const Eigen::VectorXd& w_new,
                         const WorkingSet& working, const ShapeVector& shapes);

struct StopDecision {
  bool stop = false;
  BasisElement add;
  double max_derivative = 0.0;
};

// Gaussian stops when no candidate derivative is positive; the other
// families stop below eps_irls or when the objective fails to increase.
// Otherwise returns the candidate with the largest derivative
// (lexicographically smallest (coord, knot) on ties).
StopDecision stopping_check(const std::vector<std::vector<double>>& derivs,
                            const WorkingSet& working, std::span<const double> objective_history,
                            const SolverOptions& opts, const ExponentialFamily& family);

// Active-set maximum likelihood fit of the shape-constrained additive model.
AdditiveFit fit_additive(const Dataset& data, const ShapeVector& shapes,
                         const ExponentialFamily& family, const SolverOptions& opts = {});

}  // namespace shapereg
