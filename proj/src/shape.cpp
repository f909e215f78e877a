#include "shapereg/shape.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "shapereg/errors.hpp"

namespace shapereg {

Shape shape_from_label(int v) {
  if (v < 1 || v > 9) throw std::invalid_argument("shape label must be in 1..9, got " + std::to_string(v));
  return static_cast<Shape>(v);
}

const char* shape_name(Shape s) {
  switch (s) {
    case Shape::Linear: return "lin";
    case Shape::Increasing: return "in";
    case Shape::Decreasing: return "de";
    case Shape::Convex: return "cvx";
    case Shape::ConvexIncreasing: return "cvxin";
    case Shape::ConvexDecreasing: return "cvxde";
    case Shape::Concave: return "ccv";
    case Shape::ConcaveIncreasing: return "ccvin";
    case Shape::ConcaveDecreasing: return "ccvde";
  }
  return "?";
}

Shape shape_from_name(std::string_view name) {
  for (int v = 1; v <= 9; ++v)
    if (name == shape_name(static_cast<Shape>(v))) return static_cast<Shape>(v);
  if (!name.empty() && name.find_first_not_of("0123456789") == std::string_view::npos)
    return shape_from_label(std::stoi(std::string(name)));
  throw std::invalid_argument("unknown shape name: " + std::string(name));
}

ShapeVector parse_shapes(std::string_view csv) {
  ShapeVector out;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    const std::size_t comma = csv.find(',', pos);
    const std::string_view tok = csv.substr(pos, comma == std::string_view::npos ? csv.size() - pos
                                                                                 : comma - pos);
    out.push_back(shape_from_name(tok));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string shapes_to_string(const ShapeVector& shapes) {
  std::ostringstream os;
  for (std::size_t j = 0; j < shapes.size(); ++j) {
    if (j) os << ',';
    os << shape_name(shapes[j]);
  }
  return os.str();
}

double basis_eval(Shape shape, double t, double x) {
  switch (shape) {
    case Shape::Linear:
      return x;  // the single linear basis
    case Shape::Increasing:
      return (t <= x ? 1.0 : 0.0) - (t <= 0.0 ? 1.0 : 0.0);
    case Shape::Decreasing:
      return (x < t ? 1.0 : 0.0) - (0.0 < t ? 1.0 : 0.0);
    case Shape::Convex:
    case Shape::ConvexIncreasing:
      return (t <= x ? x - t : 0.0) + (t <= 0.0 ? t : 0.0);
    case Shape::ConvexDecreasing:
      return (x <= t ? t - x : 0.0) - (0.0 <= t ? t : 0.0);
    case Shape::Concave:
    case Shape::ConcaveDecreasing:
      return (t <= x ? t - x : 0.0) - (t <= 0.0 ? t : 0.0);
    case Shape::ConcaveIncreasing:
      return (x <= t ? x - t : 0.0) + (0.0 <= t ? t : 0.0);
  }
  return 0.0;
}

double component_eval(const ComponentFit& fit, double x) {
  if (fit.shape == Shape::Linear) return fit.weights.empty() ? 0.0 : fit.weights[0] * x;
  double acc = 0.0;
  for (std::size_t i = 0; i < fit.weights.size(); ++i) {
    const double w = fit.weights[i];
    if (w != 0.0) acc += w * basis_eval(fit.shape, fit.knots[i], x);
  }
  return acc;
}

bool in_weight_cone(const ComponentFit& fit, double tol) {
  if (fit.shape == Shape::Linear) return true;
  for (std::size_t i = 0; i < fit.weights.size(); ++i) {
    if (i == 0 && first_weight_free(fit.shape)) continue;
    if (fit.weights[i] < -tol) return false;
  }
  return true;
}

bool check_shape(const ComponentFit& fit, std::span<const double> grid, double tol) {
  if (grid.size() < 3) return true;
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = component_eval(fit, grid[i]);

  const Shape s = fit.shape;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    const double diff = v[i + 1] - v[i];
    if (requires_increasing(s) && diff < -tol) return false;
    if (requires_decreasing(s) && diff > tol) return false;
  }
  // Divided-difference slopes handle non-uniform grids.
  std::vector<double> slope;
  slope.reserve(v.size() - 1);
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    const double h = grid[i + 1] - grid[i];
    if (h <= 0.0) continue;
    slope.push_back((v[i + 1] - v[i]) / h);
  }
  for (std::size_t i = 0; i + 1 < slope.size(); ++i) {
    const double d2 = slope[i + 1] - slope[i];
    if (requires_convex(s) && d2 < -tol) return false;
    if (requires_concave(s) && d2 > tol) return false;
    if (s == Shape::Linear && std::abs(d2) > tol) return false;
  }
  return true;
}

int BasisSet::n_nonlinear() const {
  int c = 0;
  for (const auto& col : cols)
    if (!is_linear(col.shape)) ++c;
  return c;
}

BasisSet build_bases(const Eigen::MatrixXd& X, const ShapeVector& shapes) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (static_cast<Eigen::Index>(shapes.size()) != d)
    throw DimensionError("shape vector length " + std::to_string(shapes.size()) +
                         " != number of covariates " + std::to_string(d));
  if (n < 2) throw DataError("need at least 2 observations");

  BasisSet out;
  out.n = n;
  out.cols.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    BasisColumn& col = out.cols[j];
    col.shape = shapes[j];
    if (is_linear(col.shape)) continue;

    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return X(a, j) < X(b, j); });

    col.obs_knot.assign(n, 0);
    for (Eigen::Index r = 0; r < n; ++r) {
      const double x = X(order[r], j);
      if (col.knots.empty() || x > col.knots.back()) col.knots.push_back(x);
      col.obs_knot[order[r]] = static_cast<std::int32_t>(col.knots.size() - 1);
    }
    if (col.knots.size() < 2) throw DegenerateCoordinateError(static_cast<int>(j));
  }
  return out;
}

}  // namespace shapereg
