#include "shapereg/index_model.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "shapereg/errors.hpp"

namespace shapereg {

namespace {
constexpr long kMaxRedraws = 100000;
constexpr double kDefaultDelta = 0.1;

int linear_column(const ShapeVector& shapes) {
  int idx = -1;
  for (int j = 0; j < static_cast<int>(shapes.size()); ++j) {
    if (!is_linear(shapes[j])) continue;
    if (idx >= 0) throw DataError("at most one linear ridge shape is identifiable");
    idx = j;
  }
  return idx;
}

double min_eigenvalue(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A.transpose() * A);
  return es.eigenvalues().minCoeff();
}
}  // namespace

bool saturated_risk(const ShapeVector& shapes) {
  if (shapes.size() <= 1) return false;
  const auto all_in = [&](std::initializer_list<Shape> set) {
    return std::all_of(shapes.begin(), shapes.end(), [&](Shape s) {
      return std::find(set.begin(), set.end(), s) != set.end();
    });
  };
  if (all_in({Shape::Linear, Shape::Convex, Shape::ConvexIncreasing, Shape::ConvexDecreasing}))
    return false;
  if (all_in({Shape::Linear, Shape::Concave, Shape::ConcaveIncreasing, Shape::ConcaveDecreasing}))
    return false;
  return true;
}

Eigen::MatrixXd project_identifiability(Eigen::MatrixXd A, const ShapeVector& shapes) {
  const int m = static_cast<int>(A.cols());
  if (m != static_cast<int>(shapes.size()))
    throw DimensionError("index matrix columns != ridge shape count");
  const int lin = linear_column(shapes);
  if (lin >= 0) {
    const Eigen::VectorXd a = A.col(lin);
    const double nrm2 = a.squaredNorm();
    if (nrm2 <= 0.0) throw DataError("degenerate index draw: zero linear column");
    for (int j = 0; j < m; ++j) {
      if (j == lin) continue;
      A.col(j) -= (a.dot(A.col(j)) / nrm2) * a;
    }
  }
  for (int j = 0; j < m; ++j) {
    const double l1 = A.col(j).lpNorm<1>();
    if (l1 < 1e-12) throw DataError("degenerate index draw: numerically zero column");
    A.col(j) /= l1;
    if (is_linear(shapes[j]) || first_weight_free(shapes[j])) {
      for (Eigen::Index i = 0; i < A.rows(); ++i) {
        if (A(i, j) == 0.0) continue;
        if (A(i, j) < 0.0) A.col(j) = -A.col(j);
        break;
      }
    }
  }
  return A;
}

Eigen::MatrixXd sample_index_matrix(int d, int m, const ShapeVector& shapes, Rng& rng) {
  if (m > d) throw DimensionError("index dimension m exceeds covariate dimension d");
  for (int attempt = 0; attempt < 64; ++attempt) {
    Eigen::MatrixXd A(d, m);
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < d; ++i) A(i, j) = rng.normal();
    try {
      return project_identifiability(std::move(A), shapes);
    } catch (const DataError&) {
      // zero column after projection: redraw
    }
  }
  throw DataError("could not draw a non-degenerate index matrix");
}

bool rejection_check(const Eigen::MatrixXd& A, const ShapeVector& shapes, double delta) {
  if (!saturated_risk(shapes)) return true;
  return min_eigenvalue(A) >= delta;
}

IndexLoglik index_loglik(const Eigen::MatrixXd& A, const Dataset& data,
                         const ShapeVector& shapes, const ExponentialFamily& family,
                         const SolverOptions& opts) {
  if (A.rows() != data.d())
    throw DimensionError("index matrix rows != covariate dimension");
  Dataset projected;
  projected.X = data.X * A;
  projected.y = data.y;
  projected.weights = data.weights;
  projected.trials = data.trials;
  AdditiveFit fit = fit_additive(projected, shapes, family, opts);
  return {fit.loglik, std::move(fit)};
}

namespace {

// Objective for the local polish: reproject the raw entries, reject outside
// the delta cone, score by the projected fit.
double polish_objective(const Eigen::VectorXd& raw, int d, int m, const Dataset& data,
                        const ShapeVector& shapes, const ExponentialFamily& family,
                        const SolverOptions& solver, double delta) {
  Eigen::MatrixXd A = Eigen::Map<const Eigen::MatrixXd>(raw.data(), d, m);
  try {
    A = project_identifiability(std::move(A), shapes);
  } catch (const DataError&) {
    return -std::numeric_limits<double>::infinity();
  }
  if (!rejection_check(A, shapes, delta)) return -std::numeric_limits<double>::infinity();
  try {
    return index_loglik(A, data, shapes, family, solver).value;
  } catch (const ConvergenceError&) {
    return -std::numeric_limits<double>::infinity();
  }
}

// Nelder-Mead over the d*m raw entries within a fixed evaluation budget.
Eigen::VectorXd nelder_mead(const Eigen::VectorXd& start,
                            const std::function<double(const Eigen::VectorXd&)>& f, int budget,
                            double* best_value) {
  const int dim = static_cast<int>(start.size());
  std::vector<Eigen::VectorXd> pts(dim + 1, start);
  std::vector<double> val(dim + 1);
  for (int i = 1; i <= dim; ++i)
    pts[i][i - 1] += 0.05 * std::max(1.0, std::abs(start[i - 1]));
  int evals = 0;
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i <= dim; ++i) val[i] = f(pts[i]);
  evals += dim + 1;

  const auto order = [&]() {
    std::vector<int> idx(dim + 1);
    for (int i = 0; i <= dim; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return val[a] > val[b]; });
    std::vector<Eigen::VectorXd> p2(dim + 1);
    std::vector<double> v2(dim + 1);
    for (int i = 0; i <= dim; ++i) {
      p2[i] = pts[idx[i]];
      v2[i] = val[idx[i]];
    }
    pts = std::move(p2);
    val = std::move(v2);
  };

  order();
  while (evals < budget) {
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < dim; ++i) centroid += pts[i];
    centroid /= dim;

    const Eigen::VectorXd refl = centroid + (centroid - pts[dim]);
    const double frefl = f(refl);
    ++evals;
    if (frefl > val[0]) {
      const Eigen::VectorXd expa = centroid + 2.0 * (centroid - pts[dim]);
      const double fexpa = f(expa);
      ++evals;
      if (fexpa > frefl) {
        pts[dim] = expa;
        val[dim] = fexpa;
      } else {
        pts[dim] = refl;
        val[dim] = frefl;
      }
    } else if (frefl > val[dim - 1]) {
      pts[dim] = refl;
      val[dim] = frefl;
    } else {
      const Eigen::VectorXd contr = centroid + 0.5 * (pts[dim] - centroid);
      const double fcontr = f(contr);
      ++evals;
      if (fcontr > val[dim]) {
        pts[dim] = contr;
        val[dim] = fcontr;
      } else {
        for (int i = 1; i <= dim && evals < budget; ++i) {
          pts[i] = pts[0] + 0.5 * (pts[i] - pts[0]);
          val[i] = f(pts[i]);
          ++evals;
        }
      }
    }
    order();
  }
  if (best_value) *best_value = val[0];
  return pts[0];
}

}  // namespace

IndexFit fit_index_model(const Dataset& data, const ShapeVector& shapes,
                         const ExponentialFamily& family, const IndexOptions& opts) {
  validate_dataset(data, family);
  const int d = static_cast<int>(data.d());
  const int m = static_cast<int>(shapes.size());
  if (m > d) throw DimensionError("index dimension m exceeds covariate dimension d");
  if (opts.searches < 1) throw std::invalid_argument("need at least one search");

  const bool risky = saturated_risk(shapes);
  double delta = opts.delta;
  if (risky && delta <= 0.0) delta = kDefaultDelta;
  if (!risky) delta = 0.0;

  const int N = opts.searches;
  std::vector<Eigen::MatrixXd> candidates(N);
  long redraws = 0;
  for (int k = 0; k < N; ++k) {
    Rng stream = Rng::substream(opts.seed, static_cast<std::uint64_t>(k));
    while (true) {
      Eigen::MatrixXd A = sample_index_matrix(d, m, shapes, stream);
      if (rejection_check(A, shapes, delta)) {
        candidates[k] = std::move(A);
        break;
      }
      if (++redraws > kMaxRedraws)
        throw DataError("rejection sampling exhausted " + std::to_string(kMaxRedraws) +
                        " redraws; delta = " + std::to_string(delta) +
                        " may be infeasible for d = " + std::to_string(d));
    }
  }

  std::vector<double> values(N, -std::numeric_limits<double>::infinity());
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < N; ++k) {
    try {
      values[k] = index_loglik(candidates[k], data, shapes, family, opts.solver).value;
    } catch (const ConvergenceError&) {
      // leave -inf: an unscorable draw never wins
    }
  }

  int best = 0;
  for (int k = 1; k < N; ++k)
    if (values[k] > values[best]) best = k;
  if (!std::isfinite(values[best]))
    throw ConvergenceError("no index candidate admitted a converged fit");

  IndexFit out;
  out.index_matrix = candidates[best];
  out.delta = delta;
  out.search_log = values;
  out.best_draw = best;

  if (opts.refine) {
    const Eigen::VectorXd start =
        Eigen::Map<const Eigen::VectorXd>(out.index_matrix.data(), d * m);
    double polished_value = -std::numeric_limits<double>::infinity();
    const Eigen::VectorXd raw = nelder_mead(
        start,
        [&](const Eigen::VectorXd& v) {
          return polish_objective(v, d, m, data, shapes, family, opts.solver, delta);
        },
        opts.refine_budget, &polished_value);
    if (polished_value > values[best]) {
      Eigen::MatrixXd A = Eigen::Map<const Eigen::MatrixXd>(raw.data(), d, m);
      A = project_identifiability(std::move(A), shapes);
      if (rejection_check(A, shapes, delta)) {
        out.index_matrix = std::move(A);
        out.refined = true;
      }
    }
  }

  IndexLoglik final_fit = index_loglik(out.index_matrix, data, shapes, family, opts.solver);
  out.ridge_fit = std::move(final_fit.fit);
  return out;
}

double amari_distance(const Eigen::MatrixXd& A_est, const Eigen::MatrixXd& A0) {
  const Eigen::Index d = A0.rows();
  if (A0.cols() != d || A_est.rows() != d || A_est.cols() != d)
    throw DimensionError("amari_distance needs square matrices of equal size");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A0);
  if (!lu.isInvertible()) throw DataError("amari_distance: reference matrix is singular");
  const Eigen::MatrixXd C = (A_est * lu.inverse()).cwiseAbs();

  double acc = 0.0;
  for (Eigen::Index i = 0; i < d; ++i)
    acc += C.row(i).sum() / C.row(i).maxCoeff() - 1.0;
  for (Eigen::Index j = 0; j < d; ++j)
    acc += C.col(j).sum() / C.col(j).maxCoeff() - 1.0;
  return acc / (2.0 * static_cast<double>(d));
}

}  // namespace shapereg
