#include "shapereg/active_set.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "shapereg/errors.hpp"

namespace shapereg {

namespace {

constexpr double kGammaEtaWall = -1e-10;  // dom(B) is the open negative half-line
constexpr int kMaxHalvings = 30;

double clamped_mean_link(const Dataset& data, const ExponentialFamily& family,
                         const Eigen::VectorXd& omega) {
  const double n = static_cast<double>(data.n());
  const double mean = omega.dot(data.y) / omega.sum();
  switch (family.kind) {
    case Family::Gaussian:
      return mean;
    case Family::Poisson:
      return family.link(std::max(mean, 1.0 / (2.0 * n)));
    case Family::Binomial: {
      const double t = data.trials.size() ? data.trials.maxCoeff()
                                          : static_cast<double>(family.trials);
      const double eps = 1.0 / (2.0 * n * t);
      return family.link(std::clamp(mean, eps, 1.0 - eps));
    }
    case Family::Gamma:
      return family.link(mean);
  }
  return 0.0;
}

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                          bool* rank_deficient) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() == Eigen::Success) {
    Eigen::VectorXd x = ldlt.solve(b);
    x += ldlt.solve(b - A * x);  // one refinement step
    const double scale = 1.0 + b.cwiseAbs().maxCoeff();
    if (x.allFinite() && (A * x - b).cwiseAbs().maxCoeff() <= 1e-8 * scale) return x;
  }
  if (rank_deficient) *rank_deficient = true;
  // Minimum-norm solution of the rank-deficient normal equations.
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
  return cod.solve(b);
}

// Working-set design matrix with incrementally maintained columns; for the
// Gaussian family the normal equations are cached and updated as elements
// enter and leave the set.
class Engine {
 public:
  Engine(const Dataset& data, const ExponentialFamily& family, const BasisSet& basis,
         const SolverOptions& opts)
      : data_(data),
        family_(family),
        basis_(basis),
        opts_(opts),
        omega_(effective_weights(data, family)),
        n_(data.n()) {}

  const Eigen::VectorXd& omega() const { return omega_; }
  int p() const { return 1 + static_cast<int>(members_.size()); }

  void set_members(const std::vector<BasisElement>& members) {
    members_ = members;
    G_.resize(n_, p());
    G_.col(0).setOnes();
    for (std::size_t m = 0; m < members_.size(); ++m)
      fill_column(members_[m], G_.col(static_cast<Eigen::Index>(m) + 1));
    if (family_.is_gaussian()) rebuild_normal();
  }

  void add_member(const BasisElement& e) {
    members_.push_back(e);
    G_.conservativeResize(Eigen::NoChange, p());
    fill_column(e, G_.col(p() - 1));
    if (family_.is_gaussian()) {
      const Eigen::VectorXd g = G_.col(p() - 1);
      const Eigen::VectorXd wg = omega_.cwiseProduct(g);
      Eigen::MatrixXd M(p(), p());
      M.topLeftCorner(p() - 1, p() - 1) = M_;
      M.col(p() - 1).head(p() - 1) = G_.leftCols(p() - 1).transpose() * wg;
      M.row(p() - 1).head(p() - 1) = M.col(p() - 1).head(p() - 1).transpose();
      M(p() - 1, p() - 1) = g.dot(wg);
      M_ = std::move(M);
      b_.conservativeResize(p());
      b_[p() - 1] = wg.dot(data_.y);
    }
  }

  // idx: sorted ascending indices into members_.
  void remove_members(const std::vector<std::size_t>& idx) {
    std::vector<Eigen::Index> keep;
    keep.push_back(0);
    std::size_t cursor = 0;
    for (std::size_t m = 0; m < members_.size(); ++m) {
      if (cursor < idx.size() && idx[cursor] == m) {
        ++cursor;
        continue;
      }
      keep.push_back(static_cast<Eigen::Index>(m) + 1);
    }
    G_ = G_(Eigen::all, keep).eval();
    if (family_.is_gaussian()) {
      M_ = M_(keep, keep).eval();
      b_ = b_(keep).eval();
    }
    std::vector<BasisElement> rest;
    rest.reserve(members_.size() - idx.size());
    cursor = 0;
    for (std::size_t m = 0; m < members_.size(); ++m) {
      if (cursor < idx.size() && idx[cursor] == m) {
        ++cursor;
        continue;
      }
      rest.push_back(members_[m]);
    }
    members_ = std::move(rest);
  }

  Eigen::VectorXd eta_raw(const Eigen::VectorXd& beta) const { return G_ * beta; }

  Eigen::VectorXd eta_eval(const Eigen::VectorXd& beta) const {
    Eigen::VectorXd eta = G_ * beta;
    if (clamps()) eta = eta.cwiseMax(-opts_.eta_cap).cwiseMin(opts_.eta_cap);
    return eta;
  }

  Eigen::VectorXd mean_values(const Eigen::VectorXd& eta) const {
    Eigen::VectorXd mu(n_);
    for (Eigen::Index i = 0; i < n_; ++i) mu[i] = family_.inv_link(eta[i]);
    return mu;
  }

  double objective(const Eigen::VectorXd& beta) const {
    const Eigen::VectorXd eta = eta_eval(beta);
    if (family_.kind == Family::Gamma && eta.maxCoeff() >= 0.0)
      return -std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n_; ++i)
      acc += omega_[i] * (data_.y[i] * eta[i] - family_.log_partition_finite(eta[i]));
    return acc / static_cast<double>(n_);
  }

  Eigen::VectorXd weighted_residuals(const Eigen::VectorXd& beta) const {
    const Eigen::VectorXd mu = mean_values(eta_eval(beta));
    return omega_.cwiseProduct(data_.y - mu);
  }

  Eigen::VectorXd default_start() const {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(p());
    w[0] = clamped_mean_link(data_, family_, omega_);
    return w;
  }

  IrlsResult solve(Eigen::VectorXd beta) {
    IrlsResult res;
    if (family_.is_gaussian()) {
      res.w = solve_spd(M_, b_, &res.rank_deficient);
      res.iterations = 1;
      return res;
    }
    if (family_.kind == Family::Gamma && eta_raw(beta).maxCoeff() > kGammaEtaWall)
      beta = default_start();

    const double inv_n = 1.0 / static_cast<double>(n_);
    for (int it = 0; it < opts_.max_irls_iters; ++it) {
      const Eigen::VectorXd eta = eta_eval(beta);
      const Eigen::VectorXd mu = mean_values(eta);
      const Eigen::VectorXd grad = G_.transpose() * omega_.cwiseProduct(data_.y - mu) * inv_n;
      if (grad.cwiseAbs().maxCoeff() < opts_.eps_irls) {
        res.w = std::move(beta);
        res.iterations = it;
        return res;
      }
      Eigen::VectorXd curv(n_);
      for (Eigen::Index i = 0; i < n_; ++i) curv[i] = omega_[i] * family_.variance(eta[i]);
      const Eigen::MatrixXd H = G_.transpose() * curv.asDiagonal() * G_ * inv_n;
      const Eigen::VectorXd dir = solve_spd(H, grad, &res.rank_deficient);

      double step = 1.0;
      if (family_.kind == Family::Gamma) {
        const Eigen::VectorXd deta = G_ * dir;
        for (Eigen::Index i = 0; i < n_; ++i)
          if (deta[i] > 0.0) step = std::min(step, (kGammaEtaWall - eta[i]) / deta[i]);
        step = std::max(step, 0.0);
      }
      const double psi0 = objective(beta);
      int halvings = 0;
      while (halvings < kMaxHalvings && objective(beta + step * dir) < psi0) {
        step *= 0.5;
        ++halvings;
      }
      if (halvings == kMaxHalvings && objective(beta + step * dir) < psi0)
        throw ConvergenceError("IRLS diverged: no ascent after " +
                               std::to_string(kMaxHalvings) + " step halvings");
      beta += step * dir;
      res.iterations = it + 1;
    }
    res.hit_max_iters = true;
    res.w = std::move(beta);
    return res;
  }

  const std::vector<BasisElement>& members() const { return members_; }

 private:
  bool clamps() const {
    return family_.kind == Family::Poisson || family_.kind == Family::Binomial;
  }

  void fill_column(const BasisElement& e, Eigen::Ref<Eigen::VectorXd> out) const {
    if (e.knot == kLinearKnot) {
      out = data_.X.col(e.coord);
      return;
    }
    const BasisColumn& col = basis_.cols[e.coord];
    const double t = col.knots[static_cast<std::size_t>(e.knot)];
    for (Eigen::Index i = 0; i < n_; ++i)
      out[i] = basis_eval(col.shape, t, data_.X(i, e.coord));
  }

  void rebuild_normal() {
    M_ = G_.transpose() * omega_.asDiagonal() * G_;
    b_ = G_.transpose() * omega_.cwiseProduct(data_.y);
  }

  const Dataset& data_;
  ExponentialFamily family_;
  const BasisSet& basis_;
  SolverOptions opts_;
  Eigen::VectorXd omega_;
  Eigen::Index n_;
  std::vector<BasisElement> members_;
  Eigen::MatrixXd G_;
  Eigen::MatrixXd M_;  // Gaussian normal-equation cache
  Eigen::VectorXd b_;
};

}  // namespace

int SolverOptions::resolved_max_outer(Eigen::Index n, int n_nonlinear) const {
  if (max_outer_iters > 0) return max_outer_iters;
  const long long v = 2LL * static_cast<long long>(n) * std::max(1, n_nonlinear);
  return static_cast<int>(std::min(v, 10000LL));
}

bool WorkingSet::contains(const BasisElement& e) const {
  return std::find(members.begin(), members.end(), e) != members.end();
}

bool WorkingSet::constrained(std::size_t idx, const ShapeVector& shapes) const {
  const BasisElement& e = members[idx];
  if (e.knot == kLinearKnot) return false;
  if (e.knot == 0 && first_weight_free(shapes[static_cast<std::size_t>(e.coord)])) return false;
  return true;
}

WorkingSet initial_working_set(const ShapeVector& shapes) {
  WorkingSet ws;
  for (int j = 0; j < static_cast<int>(shapes.size()); ++j) {
    if (is_linear(shapes[j]))
      ws.members.push_back({j, kLinearKnot});
    else if (first_weight_free(shapes[j]))
      ws.members.push_back({j, 0});
  }
  return ws;
}

double AdditiveFit::eval(std::span<const double> x) const {
  double acc = intercept;
  for (std::size_t j = 0; j < components.size(); ++j)
    acc += component_eval(components[j], x[j]);
  return acc;
}

IrlsResult irls_solve(const Dataset& data, const ExponentialFamily& family,
                      const BasisSet& basis, const WorkingSet& working,
                      const Eigen::VectorXd& warm, const SolverOptions& opts) {
  for (const BasisElement& e : working.members) {
    if (e.coord < 0 || e.coord >= static_cast<int>(basis.cols.size()))
      throw DimensionError("working set references coordinate " + std::to_string(e.coord));
    if (e.knot != kLinearKnot &&
        (is_linear(basis.cols[e.coord].shape) ||
         e.knot >= static_cast<int>(basis.cols[e.coord].knots.size())))
      throw DimensionError("working set references invalid knot");
  }
  Engine eng(data, family, basis, opts);
  eng.set_members(working.members);
  Eigen::VectorXd start = warm;
  if (start.size() == 0) start = eng.default_start();
  if (start.size() != eng.p()) throw DimensionError("warm start length mismatch");
  return eng.solve(std::move(start));
}

std::vector<std::vector<double>> compute_derivatives(const Eigen::VectorXd& weighted_resid,
                                                     const BasisSet& basis) {
  if (weighted_resid.size() != basis.n)
    throw DimensionError("residual length != number of observations");
  const int d = static_cast<int>(basis.cols.size());
  const double inv_n = 1.0 / static_cast<double>(basis.n);
  std::vector<std::vector<double>> D(d);

#pragma omp parallel for schedule(dynamic)
  for (int j = 0; j < d; ++j) {
    const BasisColumn& col = basis.cols[j];
    if (is_linear(col.shape)) continue;
    const int K = static_cast<int>(col.knots.size());
    const std::vector<double>& t = col.knots;

    // residuals pooled onto knots, then prefix sums C_k
    std::vector<double> pooled(K, 0.0);
    for (Eigen::Index i = 0; i < basis.n; ++i) pooled[col.obs_knot[i]] += weighted_resid[i];
    std::vector<double> C(K);
    double acc = 0.0;
    for (int k = 0; k < K; ++k) C[k] = (acc += pooled[k]);
    const double S = C[K - 1];  // ~0 at an intercept-stationary point

    std::vector<double>& out = D[j];
    out.assign(K, 0.0);
    switch (col.shape) {
      case Shape::Increasing:
        for (int k = 0; k < K; ++k)
          out[k] = ((S - (k ? C[k - 1] : 0.0)) - (t[k] <= 0.0 ? S : 0.0)) * inv_n;
        break;
      case Shape::Decreasing:
        for (int k = 0; k < K; ++k)
          out[k] = ((k ? C[k - 1] : 0.0) - (0.0 < t[k] ? S : 0.0)) * inv_n;
        break;
      case Shape::Convex:
      case Shape::ConvexIncreasing: {
        double tail = 0.0;  // sum_{k >= i} pooled_k (t_k - t_i)
        for (int k = K - 1; k >= 0; --k) {
          if (k < K - 1) tail += (t[k + 1] - t[k]) * (S - C[k]);
          out[k] = (tail + (t[k] <= 0.0 ? t[k] * S : 0.0)) * inv_n;
        }
        break;
      }
      case Shape::ConvexDecreasing: {
        double head = 0.0;  // sum_{k <= i} pooled_k (t_i - t_k)
        for (int k = 0; k < K; ++k) {
          if (k > 0) head += (t[k] - t[k - 1]) * C[k - 1];
          out[k] = (head - (0.0 <= t[k] ? t[k] * S : 0.0)) * inv_n;
        }
        break;
      }
      case Shape::Concave:
      case Shape::ConcaveDecreasing: {
        double tail = 0.0;
        for (int k = K - 1; k >= 0; --k) {
          if (k < K - 1) tail += (t[k + 1] - t[k]) * (S - C[k]);
          out[k] = (-tail - (t[k] <= 0.0 ? t[k] * S : 0.0)) * inv_n;
        }
        break;
      }
      case Shape::ConcaveIncreasing: {
        double head = 0.0;
        for (int k = 0; k < K; ++k) {
          if (k > 0) head += (t[k] - t[k - 1]) * C[k - 1];
          out[k] = (-head + (0.0 <= t[k] ? t[k] * S : 0.0)) * inv_n;
        }
        break;
      }
      case Shape::Linear:
        break;
    }
  }
  return D;
}

MovingRatio moving_ratio(const Eigen::VectorXd& w_star, const Eigen::VectorXd& w_new,
                         const WorkingSet& working, const ShapeVector& shapes) {
  const std::size_t m = working.members.size();
  if (static_cast<std::size_t>(w_star.size()) != m ||
      static_cast<std::size_t>(w_new.size()) != m)
    throw DimensionError("moving_ratio: weight length != working-set size");

  MovingRatio out;
  out.p = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    if (!working.constrained(i, shapes)) continue;
    if (w_new[i] > 0.0) continue;
    const double ws = w_star[i];
    const double ratio = ws <= 0.0 ? 0.0 : ws / (ws - w_new[i]);
    if (ratio < out.p) {
      out.p = ratio;
      out.drop.assign(1, i);
    } else if (ratio == out.p) {
      out.drop.push_back(i);
    }
  }
  if (out.drop.empty())
    throw std::logic_error("moving_ratio called without any cone violation");
  return out;
}

StopDecision stopping_check(const std::vector<std::vector<double>>& derivs,
                            const WorkingSet& working, std::span<const double> objective_history,
                            const SolverOptions& opts, const ExponentialFamily& family) {
  StopDecision dec;
  dec.max_derivative = -std::numeric_limits<double>::infinity();
  bool found = false;
  for (int j = 0; j < static_cast<int>(derivs.size()); ++j) {
    for (int i = 0; i < static_cast<int>(derivs[j].size()); ++i) {
      const BasisElement e{j, i};
      if (working.contains(e)) continue;
      // iteration order gives the lexicographically smallest (coord, knot) on ties
      if (derivs[j][i] > dec.max_derivative) {
        dec.max_derivative = derivs[j][i];
        dec.add = e;
        found = true;
      }
    }
  }
  if (!found) {
    dec.stop = true;
    dec.max_derivative = 0.0;
    return dec;
  }
  if (family.is_gaussian()) {
    dec.stop = dec.max_derivative <= 0.0;
    return dec;
  }
  const std::size_t h = objective_history.size();
  const bool stalled = h >= 2 && objective_history[h - 1] <= objective_history[h - 2];
  dec.stop = dec.max_derivative < opts.eps_irls || stalled;
  return dec;
}

namespace {

AdditiveFit assemble_fit(const Dataset& data, const ShapeVector& shapes, const BasisSet& basis,
                         const ExponentialFamily& family, const SolverOptions& opts, Engine& eng,
                         const Eigen::VectorXd& beta, std::vector<double> history, int iterations,
                         bool converged, std::vector<std::string> warnings) {
  AdditiveFit fit;
  fit.intercept = beta[0];
  fit.components.resize(shapes.size());
  for (std::size_t j = 0; j < shapes.size(); ++j) {
    ComponentFit& c = fit.components[j];
    c.shape = shapes[j];
    if (!is_linear(shapes[j])) {
      c.knots = basis.cols[j].knots;
      c.weights.assign(c.knots.size(), 0.0);
    } else {
      c.weights.assign(1, 0.0);
    }
  }
  const auto& members = eng.members();
  for (std::size_t m = 0; m < members.size(); ++m) {
    const BasisElement& e = members[m];
    const double w = beta[static_cast<Eigen::Index>(m) + 1];
    if (e.knot == kLinearKnot)
      fit.components[e.coord].weights[0] = w;
    else
      fit.components[e.coord].weights[static_cast<std::size_t>(e.knot)] = w;
  }
  fit.fitted_eta = eng.eta_raw(beta);
  fit.saturated.assign(data.n(), 0);
  if (family.kind == Family::Poisson || family.kind == Family::Binomial)
    for (Eigen::Index i = 0; i < data.n(); ++i)
      fit.saturated[i] = std::abs(fit.fitted_eta[i]) >= opts.eta_cap ? 1 : 0;
  fit.loglik = history.empty() ? eng.objective(beta) : history.back();
  fit.iterations = iterations;
  fit.converged = converged;
  fit.objective_history = std::move(history);
  fit.warnings = std::move(warnings);
  return fit;
}

}  // namespace

AdditiveFit fit_additive(const Dataset& data, const ShapeVector& shapes,
                         const ExponentialFamily& family, const SolverOptions& opts) {
  validate_dataset(data, family);
  if (data.d() == 0) throw DimensionError("need at least one covariate");
  const BasisSet basis = build_bases(data.X, shapes);

  std::vector<std::string> warnings;
  for (std::size_t j = 0; j < shapes.size(); ++j)
    if (first_weight_free(shapes[j]) && basis.cols[j].knots.size() == 2)
      warnings.push_back("coordinate " + std::to_string(j + 1) +
                         ": curvature constraint is vacuous on 2 distinct values");

  Engine eng(data, family, basis, opts);
  WorkingSet ws = initial_working_set(shapes);
  eng.set_members(ws.members);

  // Outer iteration 1: solve on the initial set.
  bool rank_warned = false;
  IrlsResult ir = eng.solve(eng.default_start());
  Eigen::VectorXd beta = ir.w;
  if (ir.rank_deficient && !rank_warned) {
    warnings.push_back("rank-deficient working set: using minimum-norm solution");
    rank_warned = true;
  }
  std::vector<double> history{eng.objective(beta)};

  int k = 1;
  const int max_outer = opts.resolved_max_outer(data.n(), basis.n_nonlinear());
  bool converged = false;

  // Snapshot of the last accepted iterate, for reverting on a stalled step.
  std::vector<BasisElement> prev_members = ws.members;
  Eigen::VectorXd prev_beta = beta;

  while (true) {
    const std::vector<std::vector<double>> D =
        compute_derivatives(eng.weighted_residuals(beta), basis);
    const StopDecision dec = stopping_check(D, ws, history, opts, family);
    if (dec.stop) {
      converged = true;
      break;
    }
    if (k >= max_outer) {
      warnings.push_back("outer iteration cap " + std::to_string(max_outer) + " reached");
      break;
    }

    prev_members = ws.members;
    prev_beta = beta;

    ws.members.push_back(dec.add);
    eng.add_member(dec.add);
    Eigen::VectorXd beta_star(beta.size() + 1);
    beta_star << beta, 0.0;
    ++k;

    try {
      while (true) {
        ir = eng.solve(beta_star);
        if (ir.rank_deficient && !rank_warned) {
          warnings.push_back("rank-deficient working set: using minimum-norm solution");
          rank_warned = true;
        }
        const Eigen::VectorXd& beta_new = ir.w;
        bool violation = false;
        for (std::size_t m = 0; m < ws.members.size(); ++m)
          if (ws.constrained(m, shapes) && beta_new[static_cast<Eigen::Index>(m) + 1] <= 0.0) {
            violation = true;
            break;
          }
        if (!violation) {
          beta = beta_new;
          break;
        }
        const MovingRatio mr =
            moving_ratio(beta_star.tail(beta_star.size() - 1),
                         beta_new.tail(beta_new.size() - 1), ws, shapes);
        beta_star = (1.0 - mr.p) * beta_star + mr.p * beta_new;
        // Erase dropped entries (their blended weight is exactly zero).
        eng.remove_members(mr.drop);
        std::vector<BasisElement> kept;
        Eigen::VectorXd beta_kept(beta_star.size() - static_cast<Eigen::Index>(mr.drop.size()));
        beta_kept[0] = beta_star[0];
        std::size_t cursor = 0;
        Eigen::Index out = 1;
        for (std::size_t m = 0; m < ws.members.size(); ++m) {
          if (cursor < mr.drop.size() && mr.drop[cursor] == m) {
            ++cursor;
            continue;
          }
          kept.push_back(ws.members[m]);
          beta_kept[out++] = beta_star[static_cast<Eigen::Index>(m) + 1];
        }
        ws.members = std::move(kept);
        beta_star = std::move(beta_kept);
      }
    } catch (ConvergenceError& e) {
      eng.set_members(prev_members);
      ws.members = prev_members;
      e.partial = std::make_shared<AdditiveFit>(
          assemble_fit(data, shapes, basis, family, opts, eng, prev_beta, history, k, false,
                       warnings));
      throw;
    }

    const double psi = eng.objective(beta);
    if (psi <= history.back()) {
      // No ascent: restore the previous iterate and stop.
      ws.members = prev_members;
      eng.set_members(prev_members);
      beta = prev_beta;
      converged = true;
      break;
    }
    history.push_back(psi);
  }

  return assemble_fit(data, shapes, basis, family, opts, eng, beta, std::move(history), k,
                      converged, std::move(warnings));
}

}  // namespace shapereg
