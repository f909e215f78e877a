#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "shapereg/active_set.hpp"
#include "shapereg/rng.hpp"

namespace shapereg {

// True when the ridge shape vector admits the perfect-fit phenomenon, in
// which case candidate index matrices must keep lambda_min(A^T A) >= delta.
// Immune vectors: any single label, or all labels in {1,4,5,6}, or all in
// {1,7,8,9}.
bool saturated_risk(const ShapeVector& ridge_shapes);

// Enforces the identifiability conventions on a raw d x m matrix: columns
// orthogonalised against the (single) linear ridge column, l1-normalised,
// sign fixed (first nonzero entry positive) for the labels whose ridge
// cannot absorb a reflection. Throws DataError on a numerically zero column.
Eigen::MatrixXd project_identifiability(Eigen::MatrixXd A, const ShapeVector& ridge_shapes);

// i.i.d. N(0,1) entries pushed through project_identifiability; degenerate
// draws are retried internally.
Eigen::MatrixXd sample_index_matrix(int d, int m, const ShapeVector& ridge_shapes, Rng& rng);

// Accept iff the shape vector is risk-free or lambda_min(A^T A) >= delta.
bool rejection_check(const Eigen::MatrixXd& A, const ShapeVector& ridge_shapes, double delta);

struct IndexLoglik {
  double value = 0.0;
  AdditiveFit fit;
};

// Additive fit on the projected covariates Z = X A; returns the attained
// objective and the ridge fit.
IndexLoglik index_loglik(const Eigen::MatrixXd& A, const Dataset& data,
                         const ShapeVector& ridge_shapes, const ExponentialFamily& family,
                         const SolverOptions& opts = {});

struct IndexOptions {
  int searches = 100;      // number of accepted random candidates
  double delta = 0.0;      // 0 = choose 0.1 automatically when required
  bool refine = false;     // derivative-free local polish of the best draw
  int refine_budget = 200; // objective evaluations for the polish
  std::uint64_t seed = 0;
  SolverOptions solver;
};

struct IndexFit {
  Eigen::MatrixXd index_matrix;      // d x m, identifiability-normalised
  AdditiveFit ridge_fit;             // over the m projected coordinates
  double delta = 0.0;                // eigenvalue floor used (0 if none)
  std::vector<double> search_log;    // objective of every accepted draw
  int best_draw = -1;
  bool refined = false;
};

// Stochastic search: draw `searches` accepted candidates, score each by its
// projected additive fit, keep the best (optionally polished), and refit the
// ridge functions on the winner. Candidate evaluations run in parallel; each
// draw uses its own seed-derived stream, so results do not depend on thread
// scheduling.
IndexFit fit_index_model(const Dataset& data, const ShapeVector& ridge_shapes,
                         const ExponentialFamily& family, const IndexOptions& opts = {});

// Permutation/scaling-invariant dissimilarity between two square index
// matrices, in [0, d-1]; zero iff A_est = P S A0 for a permutation P and a
// diagonal scaling S. Throws on singular A0.
double amari_distance(const Eigen::MatrixXd& A_est, const Eigen::MatrixXd& A0);

}  // namespace shapereg
