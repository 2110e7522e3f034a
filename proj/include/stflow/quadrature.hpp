#pragma once

#include <vector>

namespace stflow {

// Gauss-Legendre rule on [0,1].
struct GaussRule1D {
  std::vector<double> points;
  std::vector<double> weights;
};

// Tensor rule over [0,1]^dim; points stored point-major (dim coordinates each).
struct QuadratureRule {
  int dim = 1;
  std::vector<double> points;
  std::vector<double> weights;

  int size() const { return static_cast<int>(weights.size()); }
  const double* point(int q) const { return points.data() + q * dim; }
};

// 1 <= n <= 10, otherwise std::invalid_argument.
GaussRule1D gauss_legendre(int n);

// One entry of `n_per_dir` per direction.
QuadratureRule make_quadrature(const std::vector<int>& n_per_dir);

}  // namespace stflow
