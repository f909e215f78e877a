#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace shapereg {

// Per-coordinate shape constraints, numbered 1..9.
enum class Shape : int {
  Linear = 1,
  Increasing = 2,
  Decreasing = 3,
  Convex = 4,
  ConvexIncreasing = 5,
  ConvexDecreasing = 6,
  Concave = 7,
  ConcaveIncreasing = 8,
  ConcaveDecreasing = 9,
};

using ShapeVector = std::vector<Shape>;

Shape shape_from_label(int label);
// Accepts the short names lin,in,de,cvx,cvxin,cvxde,ccv,ccvin,ccvde or a numeric label.
Shape shape_from_name(std::string_view name);
const char* shape_name(Shape s);
inline int label(Shape s) { return static_cast<int>(s); }

inline bool is_linear(Shape s) { return s == Shape::Linear; }
// Labels whose first basis weight carries no sign constraint.
inline bool first_weight_free(Shape s) { return s == Shape::Convex || s == Shape::Concave; }
inline bool requires_increasing(Shape s) {
  return s == Shape::Increasing || s == Shape::ConvexIncreasing || s == Shape::ConcaveIncreasing;
}
inline bool requires_decreasing(Shape s) {
  return s == Shape::Decreasing || s == Shape::ConvexDecreasing || s == Shape::ConcaveDecreasing;
}
inline bool requires_convex(Shape s) {
  return s == Shape::Convex || s == Shape::ConvexIncreasing || s == Shape::ConvexDecreasing;
}
inline bool requires_concave(Shape s) {
  return s == Shape::Concave || s == Shape::ConcaveIncreasing || s == Shape::ConcaveDecreasing;
}
// Hinge-type bases (piecewise-linear); the monotone labels use step bases.
inline bool hinge_basis(Shape s) { return requires_convex(s) || requires_concave(s); }

ShapeVector parse_shapes(std::string_view comma_separated);
std::string shapes_to_string(const ShapeVector& shapes);

// Basis function attached to one knot; zero at the origin by construction.
// Shape::Linear has no knotted basis (its single basis function is x itself).
double basis_eval(Shape shape, double knot, double x);

// One fitted additive component: knots with their basis weights, or a single
// slope entry for a linear component.
struct ComponentFit {
  Shape shape = Shape::Linear;
  std::vector<double> knots;    // sorted distinct values; empty for Linear
  std::vector<double> weights;  // aligned with knots; length 1 (slope) for Linear

  bool empty() const { return weights.empty(); }
};

double component_eval(const ComponentFit& fit, double x);

// Weight-cone membership: all weights >= -tol except the sign-free first
// weight of the convex/concave labels.
bool in_weight_cone(const ComponentFit& fit, double tol = 0.0);

// Evaluates the component on a sorted grid and verifies monotonicity /
// convexity via first differences and divided-difference slopes.
bool check_shape(const ComponentFit& fit, std::span<const double> grid, double tol = 1e-10);

// Per-coordinate sorted distinct knots plus the observation -> knot map,
// shared by the solver and the derivative recurrences.
struct BasisColumn {
  Shape shape = Shape::Linear;
  std::vector<double> knots;
  std::vector<std::int32_t> obs_knot;  // empty for Linear
};

struct BasisSet {
  Eigen::Index n = 0;
  std::vector<BasisColumn> cols;
  int n_nonlinear() const;
};

// Sorts every non-linear coordinate and merges duplicate covariate values
// into single knots. Throws DegenerateCoordinateError when a non-linear
// coordinate is constant.
BasisSet build_bases(const Eigen::MatrixXd& X, const ShapeVector& shapes);

}  // namespace shapereg
