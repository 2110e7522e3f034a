#include "stflow/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace stflow {

GaussRule1D gauss_legendre(int n) {
  if (n < 1 || n > 10) throw std::invalid_argument("gauss_legendre: 1 <= n <= 10 required");
  GaussRule1D r;
  r.points.resize(n);
  r.weights.resize(n);
  // Newton iteration on P_n from the Chebyshev-like initial guess.
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = pk;
    }
    dp = n == 1 ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // map [-1,1] -> [0,1]
    r.points[i] = 0.5 * (1.0 - x);
    r.points[n - 1 - i] = 0.5 * (1.0 + x);
    r.weights[i] = r.weights[n - 1 - i] = 0.5 * w;
  }
  return r;
}

QuadratureRule make_quadrature(const std::vector<int>& n_per_dir) {
  if (n_per_dir.empty()) throw std::invalid_argument("make_quadrature: no directions");
  QuadratureRule q;
  q.dim = static_cast<int>(n_per_dir.size());
  std::vector<GaussRule1D> rules;
  for (int n : n_per_dir) rules.push_back(gauss_legendre(n));
  int total = 1;
  for (int n : n_per_dir) total *= n;
  q.points.resize(static_cast<size_t>(total) * q.dim);
  q.weights.resize(total);
  for (int idx = 0; idx < total; ++idx) {
    int rem = idx;
    double w = 1.0;
    for (int d = 0; d < q.dim; ++d) {
      const int i = rem % n_per_dir[d];
      rem /= n_per_dir[d];
      q.points[static_cast<size_t>(idx) * q.dim + d] = rules[d].points[i];
      w *= rules[d].weights[i];
    }
    q.weights[idx] = w;
  }
  return q;
}

}  // namespace stflow
