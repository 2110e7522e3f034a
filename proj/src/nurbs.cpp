#include "stflow/nurbs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "stflow/errors.hpp"

namespace stflow::nurbs {

namespace {
constexpr double kDomainSlack = 1e-13;
}

bool KnotVector::is_open() const {
  if (knots.size() < static_cast<size_t>(2 * degree + 2)) return false;
  for (int i = 1; i <= degree; ++i) {
    if (knots[i] != knots[0]) return false;
    if (knots[knots.size() - 1 - i] != knots.back()) return false;
  }
  return true;
}

void KnotVector::validate() const {
  if (degree < 1 || degree > kMaxDegree)
    throw std::invalid_argument("knot vector degree must be in [1, " + std::to_string(kMaxDegree) + "]");
  if (!std::is_sorted(knots.begin(), knots.end()))
    throw std::invalid_argument("knot vector is not nondecreasing");
  if (num_basis() < degree + 1)
    throw std::invalid_argument("knot vector has fewer than p+1 basis functions");
  if (!(back() > front())) throw std::invalid_argument("knot vector has an empty domain");
}

std::vector<double> KnotVector::breakpoints() const {
  std::vector<double> b;
  for (size_t i = degree; i < knots.size() - degree; ++i)
    if (b.empty() || knots[i] != b.back()) b.push_back(knots[i]);
  return b;
}

std::vector<int> KnotVector::span_indices() const {
  std::vector<int> s;
  const int n = num_basis();
  for (int i = degree; i < n; ++i)
    if (knots[i] < knots[i + 1]) s.push_back(i);
  return s;
}

std::vector<double> KnotVector::greville() const {
  std::vector<double> g(num_basis());
  for (int i = 0; i < num_basis(); ++i) {
    double sum = 0.0;
    for (int j = 1; j <= degree; ++j) sum += knots[i + j];
    g[i] = sum / degree;
  }
  return g;
}

KnotVector uniform_knots(int degree, int n_el) {
  if (n_el < 1) throw std::invalid_argument("uniform_knots: need at least one element");
  return mapped_knots(degree, n_el, [](double x) { return x; });
}

int find_span(const KnotVector& kv, double xi) {
  const double lo = kv.front();
  const double hi = kv.back();
  const double slack = kDomainSlack * (hi - lo);
  if (!(xi >= lo - slack && xi <= hi + slack))
    throw DomainError("parameter " + std::to_string(xi) + " outside knot domain [" +
                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
  xi = std::clamp(xi, lo, hi);
  const int n = kv.num_basis();
  if (xi >= hi) {
    int i = n - 1;
    while (i > kv.degree && !(kv.knots[i] < kv.knots[i + 1])) --i;
    return i;
  }
  // Last index i in [p, n-1] with knots[i] <= xi.
  auto first = kv.knots.begin() + kv.degree;
  auto last = kv.knots.begin() + n;
  auto it = std::upper_bound(first, last + 1, xi);
  return static_cast<int>(it - kv.knots.begin()) - 1;
}

BasisEval eval_basis_ders(const KnotVector& kv, double xi, int nders) {
  return eval_basis_ders(kv, find_span(kv, xi), xi, nders);
}

BasisEval eval_basis_ders(const KnotVector& kv, int span, double xi, int nders) {
  const int p = kv.degree;
  if (nders < 0 || nders > p)
    throw std::invalid_argument("eval_basis_ders: derivative order exceeds degree");
  if (p > kMaxDegree) throw std::invalid_argument("eval_basis_ders: degree too high");
  const auto& U = kv.knots;
  xi = std::clamp(xi, kv.front(), kv.back());

  // Triangular table of basis values (ndu) and knot differences.
  double ndu[kMaxDegree + 1][kMaxDegree + 1];
  double left[kMaxDegree + 1];
  double right[kMaxDegree + 1];
  ndu[0][0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = xi - U[span + 1 - j];
    right[j] = U[span + j] - xi;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double temp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }

  BasisEval out;
  out.span = span;
  out.degree = p;
  out.nders = nders;
  for (int j = 0; j <= p; ++j) out.ders[0][j] = ndu[j][p];

  double a[2][kMaxDegree + 1];
  for (int r = 0; r <= p; ++r) {
    int s1 = 0;
    int s2 = 1;
    a[0][0] = 1.0;
    for (int k = 1; k <= nders; ++k) {
      double d = 0.0;
      const int rk = r - k;
      const int pk = p - k;
      if (r >= k) {
        a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
        d = a[s2][0] * ndu[rk][pk];
      }
      const int j1 = rk >= -1 ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
        d += a[s2][j] * ndu[rk + j][pk];
      }
      if (r <= pk) {
        a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
        d += a[s2][k] * ndu[r][pk];
      }
      out.ders[k][r] = d;
      std::swap(s1, s2);
    }
  }
  double fac = p;
  for (int k = 1; k <= nders; ++k) {
    for (int j = 0; j <= p; ++j) out.ders[k][j] *= fac;
    fac *= (p - k);
  }
  return out;
}

std::array<int, 3> NurbsPatch::extents() const {
  std::array<int, 3> e{1, 1, 1};
  for (int d = 0; d < dim_param(); ++d) e[d] = knots[d].num_basis();
  return e;
}

int NurbsPatch::index(int i, int j, int k) const {
  const auto e = extents();
  return i + e[0] * (j + e[1] * k);
}

bool NurbsPatch::is_rational() const {
  return std::any_of(weights.begin(), weights.end(), [&](double w) { return w != weights.front(); });
}

void NurbsPatch::validate() const {
  if (dim_param() < 1 || dim_param() > 3)
    throw std::invalid_argument("patch parametric dimension must be 1, 2 or 3");
  for (const auto& kv : knots) kv.validate();
  const auto e = extents();
  const size_t n = static_cast<size_t>(e[0]) * e[1] * e[2];
  if (weights.size() != n || coords.size() != n * dim_space)
    throw std::invalid_argument("control net extents do not match basis counts");
  for (double w : weights)
    if (!(w > 0.0)) throw std::invalid_argument("control point weights must be positive");
}

GeometryEval eval_geometry(const NurbsPatch& patch, std::span<const double> xi) {
  const int dp = patch.dim_param();
  const int ds = patch.dim_space;
  if (static_cast<int>(xi.size()) != dp)
    throw std::invalid_argument("eval_geometry: parametric point has wrong dimension");
  std::array<BasisEval, 3> b;
  for (int d = 0; d < dp; ++d) b[d] = eval_basis_ders(patch.knots[d], xi[d], 1);

  // Homogeneous sums: Cw = sum N w P, W = sum N w, and their first derivatives.
  double cw[3] = {0, 0, 0};
  double dcw[3][3] = {};
  double w = 0.0;
  double dw[3] = {0, 0, 0};
  const int p0 = patch.knots[0].degree;
  const int p1 = dp > 1 ? patch.knots[1].degree : 0;
  const int p2 = dp > 2 ? patch.knots[2].degree : 0;
  for (int k = 0; k <= p2; ++k) {
    for (int j = 0; j <= p1; ++j) {
      for (int i = 0; i <= p0; ++i) {
        const int ii = b[0].first_index() + i;
        const int jj = dp > 1 ? b[1].first_index() + j : 0;
        const int kk = dp > 2 ? b[2].first_index() + k : 0;
        const int idx = patch.index(ii, jj, kk);
        double val = b[0].ders[0][i];
        double grad[3] = {b[0].ders[1][i], 0, 0};
        if (dp > 1) {
          grad[0] *= b[1].ders[0][j];
          grad[1] = val * b[1].ders[1][j];
          val *= b[1].ders[0][j];
        }
        if (dp > 2) {
          grad[0] *= b[2].ders[0][k];
          grad[1] *= b[2].ders[0][k];
          grad[2] = val * b[2].ders[1][k];
          val *= b[2].ders[0][k];
        }
        const double wi = patch.weights[idx];
        const auto P = patch.point(idx);
        w += val * wi;
        for (int d = 0; d < dp; ++d) dw[d] += grad[d] * wi;
        for (int c = 0; c < ds; ++c) {
          cw[c] += val * wi * P[c];
          for (int d = 0; d < dp; ++d) dcw[c][d] += grad[d] * wi * P[c];
        }
      }
    }
  }
  GeometryEval g;
  g.x.resize(ds);
  g.jac.resize(ds, dp);
  for (int c = 0; c < ds; ++c) {
    g.x[c] = cw[c] / w;
    for (int d = 0; d < dp; ++d) g.jac(c, d) = (dcw[c][d] - g.x[c] * dw[d]) / w;
  }
  return g;
}

namespace {

// Knot refinement of a single curve in homogeneous coordinates (rows of Pw).
// Returns the new control rows; `X` must be sorted.
Eigen::MatrixXd refine_curve(const KnotVector& kv, const Eigen::MatrixXd& Pw,
                             const std::vector<double>& X, std::vector<double>& Ubar) {
  const int p = kv.degree;
  const auto& U = kv.knots;
  const int n = kv.num_basis() - 1;
  const int m = n + p + 1;
  const int r = static_cast<int>(X.size()) - 1;
  const int a = find_span(kv, X.front());
  int b = find_span(kv, X.back());
  ++b;
  Eigen::MatrixXd Q(n + r + 2, Pw.cols());
  Ubar.assign(m + r + 2, 0.0);
  for (int j = 0; j <= a - p; ++j) Q.row(j) = Pw.row(j);
  for (int j = b - 1; j <= n; ++j) Q.row(j + r + 1) = Pw.row(j);
  for (int j = 0; j <= a; ++j) Ubar[j] = U[j];
  for (int j = b + p; j <= m; ++j) Ubar[j + r + 1] = U[j];
  int i = b + p - 1;
  int k = b + p + r;
  for (int j = r; j >= 0; --j) {
    while (X[j] <= U[i] && i > a) {
      Q.row(k - p - 1) = Pw.row(i - p - 1);
      Ubar[k] = U[i];
      --k;
      --i;
    }
    Q.row(k - p - 1) = Q.row(k - p);
    for (int l = 1; l <= p; ++l) {
      const int ind = k - p + l;
      double alfa = Ubar[k + l] - X[j];
      if (std::abs(alfa) == 0.0) {
        Q.row(ind - 1) = Q.row(ind);
      } else {
        alfa /= (Ubar[k + l] - U[i - p + l]);
        Q.row(ind - 1) = alfa * Q.row(ind - 1) + (1.0 - alfa) * Q.row(ind);
      }
    }
    Ubar[k] = X[j];
    --k;
  }
  return Q;
}

}  // namespace

NurbsPatch refine_knots(const NurbsPatch& patch, int direction, std::vector<double> new_knots) {
  if (direction < 0 || direction >= patch.dim_param())
    throw std::invalid_argument("refine_knots: bad direction");
  if (new_knots.empty()) return patch;
  const KnotVector& kv = patch.knots[direction];
  for (double x : new_knots)
    if (!(x > kv.front() && x < kv.back()) && !(x == kv.front() || x == kv.back()))
      throw std::invalid_argument("refine_knots: knot " + std::to_string(x) + " outside domain");
  for (double x : new_knots)
    if (x <= kv.front() || x >= kv.back())
      throw std::invalid_argument("refine_knots: knot " + std::to_string(x) +
                                  " must lie strictly inside the domain");
  std::sort(new_knots.begin(), new_knots.end());

  const auto ext = patch.extents();
  const int ds = patch.dim_space;
  const int n_old = ext[direction];
  const int n_new = n_old + static_cast<int>(new_knots.size());

  NurbsPatch out = patch;
  std::vector<double> ubar;
  auto new_ext = ext;
  new_ext[direction] = n_new;
  const size_t total = static_cast<size_t>(new_ext[0]) * new_ext[1] * new_ext[2];
  out.coords.assign(total * ds, 0.0);
  out.weights.assign(total, 0.0);

  auto flat = [](const std::array<int, 3>& e, int i, int j, int k) { return i + e[0] * (j + e[1] * k); };
  // Iterate over all lines along `direction`.
  std::array<int, 3> other_ext = ext;
  other_ext[direction] = 1;
  for (int c2 = 0; c2 < other_ext[2]; ++c2) {
    for (int c1 = 0; c1 < other_ext[1]; ++c1) {
      for (int c0 = 0; c0 < other_ext[0]; ++c0) {
        Eigen::MatrixXd Pw(n_old, ds + 1);
        for (int t = 0; t < n_old; ++t) {
          std::array<int, 3> id{c0, c1, c2};
          id[direction] = t;
          const int idx = flat(ext, id[0], id[1], id[2]);
          const double w = patch.weights[idx];
          for (int c = 0; c < ds; ++c) Pw(t, c) = patch.coords[idx * ds + c] * w;
          Pw(t, ds) = w;
        }
        const Eigen::MatrixXd Q = refine_curve(kv, Pw, new_knots, ubar);
        for (int t = 0; t < n_new; ++t) {
          std::array<int, 3> id{c0, c1, c2};
          id[direction] = t;
          const int idx = flat(new_ext, id[0], id[1], id[2]);
          const double w = Q(t, ds);
          out.weights[idx] = w;
          for (int c = 0; c < ds; ++c) out.coords[idx * ds + c] = Q(t, c) / w;
        }
      }
    }
  }
  out.knots[direction].knots = ubar;
  return out;
}

std::vector<double> bisection_knots(const KnotVector& kv) {
  const auto b = kv.breakpoints();
  std::vector<double> mids;
  for (size_t i = 0; i + 1 < b.size(); ++i) mids.push_back(0.5 * (b[i] + b[i + 1]));
  return mids;
}

Eigen::MatrixXd interpolate_on_knots(const KnotVector& kv, std::span<const double> params,
                                     const Eigen::MatrixXd& values) {
  const int n = kv.num_basis();
  if (static_cast<int>(params.size()) != n || values.rows() != n)
    throw std::invalid_argument("interpolate_on_knots: need one sample per basis function");
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const BasisEval be = eval_basis_ders(kv, params[i], 0);
    for (int j = 0; j <= kv.degree; ++j) A(i, be.first_index() + j) = be.ders[0][j];
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible())
    throw std::invalid_argument("degenerate parametrization: interpolation matrix is singular");
  return lu.solve(values);
}

NurbsPatch interpolate_curve(const std::vector<Eigen::VectorXd>& points, std::vector<double> params,
                             int degree) {
  const int n = static_cast<int>(points.size());
  if (degree < 1 || degree > kMaxDegree) throw std::invalid_argument("interpolate_curve: bad degree");
  if (n < degree + 1) throw std::invalid_argument("interpolate_curve: need at least p+1 points");
  const int ds = static_cast<int>(points.front().size());

  if (params.empty()) {
    params.resize(n, 0.0);
    double total = 0.0;
    for (int i = 1; i < n; ++i) {
      total += (points[i] - points[i - 1]).norm();
      params[i] = total;
    }
    if (!(total > 0.0)) throw std::invalid_argument("degenerate parametrization: coincident points");
    for (double& t : params) t /= total;
  }
  if (static_cast<int>(params.size()) != n)
    throw std::invalid_argument("interpolate_curve: parameter count mismatch");
  for (int i = 1; i < n; ++i)
    if (!(params[i] > params[i - 1]))
      throw std::invalid_argument("degenerate parametrization: parameters not strictly increasing");

  // Knots by averaging.
  std::vector<double> U(degree + 1, params.front());
  for (int j = 1; j < n - degree; ++j) {
    double s = 0.0;
    for (int i = j; i < j + degree; ++i) s += params[i];
    U.push_back(s / degree);
  }
  U.insert(U.end(), degree + 1, params.back());
  KnotVector kv(degree, U);

  Eigen::MatrixXd values(n, ds);
  for (int i = 0; i < n; ++i) values.row(i) = points[i].transpose();
  const Eigen::MatrixXd ctrl = interpolate_on_knots(kv, params, values);

  NurbsPatch curve;
  curve.knots = {kv};
  curve.dim_space = ds;
  curve.weights.assign(n, 1.0);
  curve.coords.resize(static_cast<size_t>(n) * ds);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < ds; ++c) curve.coords[i * ds + c] = ctrl(i, c);
  return curve;
}

}  // namespace stflow::nurbs
