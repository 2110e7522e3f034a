#pragma once

// B-spline / NURBS primitives: knot vectors, basis evaluation, tensor-product
// patches, knot refinement and curve interpolation.

#include <array>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace stflow::nurbs {

inline constexpr int kMaxDegree = 3;

struct KnotVector {
  int degree = 0;
  std::vector<double> knots;

  KnotVector() = default;
  KnotVector(int p, std::vector<double> k) : degree(p), knots(std::move(k)) {}

  int num_basis() const { return static_cast<int>(knots.size()) - degree - 1; }
  double front() const { return knots[degree]; }
  double back() const { return knots[knots.size() - degree - 1]; }
  bool is_open() const;

  // Throws std::invalid_argument when the invariants are violated.
  void validate() const;

  // Distinct knot values in [front, back].
  std::vector<double> breakpoints() const;
  int num_spans() const { return static_cast<int>(breakpoints().size()) - 1; }
  // Span indices i with knots[i] < knots[i+1], ordered left to right.
  std::vector<int> span_indices() const;
  std::vector<double> greville() const;
};

// Open knot vector with n_el equal spans on [0,1].
KnotVector uniform_knots(int degree, int n_el);
// Open knot vector whose interior breakpoints are the images of a uniform
// partition under `map` (a monotone map of [0,1] onto itself).
template <class Map>
KnotVector mapped_knots(int degree, int n_el, Map&& map) {
  std::vector<double> k(degree + 1, 0.0);
  for (int i = 1; i < n_el; ++i) k.push_back(map(static_cast<double>(i) / n_el));
  k.insert(k.end(), degree + 1, 1.0);
  return {degree, std::move(k)};
}

// Returns i with knots[i] <= xi < knots[i+1]; the right end of the domain maps
// to the last non-empty span. Throws DomainError outside [front, back].
int find_span(const KnotVector& kv, double xi);

// The p+1 non-zero basis functions on a span and their derivatives.
struct BasisEval {
  int span = 0;
  int degree = 0;
  int nders = 0;
  // ders[k][j]: k-th derivative of N_{span-p+j}.
  std::array<std::array<double, kMaxDegree + 1>, kMaxDegree + 1> ders{};

  int first_index() const { return span - degree; }
  double value(int j) const { return ders[0][j]; }
};

// Throws std::invalid_argument if nders > p.
BasisEval eval_basis_ders(const KnotVector& kv, double xi, int nders);
// Same, with a precomputed span.
BasisEval eval_basis_ders(const KnotVector& kv, int span, double xi, int nders);

// Tensor-product NURBS with Cartesian control coordinates and positive weights.
// Control points are stored with the first parametric index running fastest.
struct NurbsPatch {
  std::vector<KnotVector> knots;  // one per parametric direction
  int dim_space = 2;
  std::vector<double> coords;  // num_control_points * dim_space
  std::vector<double> weights;

  int dim_param() const { return static_cast<int>(knots.size()); }
  int num_control_points() const { return static_cast<int>(weights.size()); }
  std::array<int, 3> extents() const;
  int index(int i, int j = 0, int k = 0) const;
  std::span<double> point(int idx) { return {coords.data() + idx * dim_space, static_cast<size_t>(dim_space)}; }
  std::span<const double> point(int idx) const {
    return {coords.data() + idx * dim_space, static_cast<size_t>(dim_space)};
  }
  bool is_rational() const;

  void validate() const;
};

using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;

struct GeometryEval {
  SmallVector x;    // physical point
  SmallMatrix jac;  // dx_i / dxi_j
};

// Rational mapping and its parametric Jacobian. Throws DomainError for points
// outside the parametric domain.
GeometryEval eval_geometry(const NurbsPatch& patch, std::span<const double> xi);

// Inserts the given knots (any order, repeats allowed) in one direction; the
// geometry is unchanged. Throws std::invalid_argument for knots outside the domain.
NurbsPatch refine_knots(const NurbsPatch& patch, int direction, std::vector<double> new_knots);

// Midpoints of every non-empty span in a direction.
std::vector<double> bisection_knots(const KnotVector& kv);

// Global interpolation through `points` (dim_space coordinates each). If
// `params` is empty, chord-length parameterisation on [0,1] is used. Knots by
// averaging. Throws std::invalid_argument when the system is singular.
NurbsPatch interpolate_curve(const std::vector<Eigen::VectorXd>& points,
                             std::vector<double> params, int degree);

// Control values c with sum_j N_j(params[i]) c_j = values[i] on a fixed knot
// vector. `values` has one row per parameter; the number of parameters must
// equal kv.num_basis().
Eigen::MatrixXd interpolate_on_knots(const KnotVector& kv, std::span<const double> params,
                                     const Eigen::MatrixXd& values);

}  // namespace stflow::nurbs
