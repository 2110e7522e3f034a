#include <cmath>
#include <map>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>

#include "stflow/errors.hpp"
#include "stflow/mesh.hpp"
#include "stflow/quadrature.hpp"

namespace stflow {

using nurbs::KnotVector;

// ------------------------------------------------------------------ motion

void MotionSpec::validate() const {
  if (kind != MotionKind::Stationary && !(period > 0))
    throw std::invalid_argument("motion period must be positive");
  if (!std::isfinite(heave_amplitude) || !std::isfinite(pitch_amplitude_deg))
    throw std::invalid_argument("motion amplitudes must be finite");
}

double MotionSpec::heave(double t) const {
  if (kind != MotionKind::Heave) return 0.0;
  return heave_amplitude * std::sin(2.0 * std::numbers::pi * t / period);
}

double MotionSpec::pitch_angle(double t) const {
  if (kind != MotionKind::Pitch) return 0.0;
  return pitch_amplitude_deg * std::numbers::pi / 180.0 * std::sin(2.0 * std::numbers::pi * t / period);
}

Eigen::Vector2d MotionSpec::apply(const Eigen::Vector2d& x, double t) const {
  switch (kind) {
    case MotionKind::Stationary:
      return x;
    case MotionKind::Heave:
      return x + Eigen::Vector2d(0.0, heave(t));
    case MotionKind::Pitch: {
      // Positive angle is nose up, i.e. a clockwise rotation about the axis.
      const double a = -pitch_angle(t);
      const Eigen::Vector2d xa(pitch_axis * chord, 0.0);
      Eigen::Matrix2d R;
      R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
      return R * (x - xa) + xa;
    }
  }
  return x;
}

Eigen::Vector2d MotionSpec::velocity(const Eigen::Vector2d& x, double t) const {
  const double w = 2.0 * std::numbers::pi / period;
  switch (kind) {
    case MotionKind::Stationary:
      return Eigen::Vector2d::Zero();
    case MotionKind::Heave:
      return Eigen::Vector2d(0.0, heave_amplitude * w * std::cos(w * t));
    case MotionKind::Pitch: {
      const double a = -pitch_angle(t);
      const double adot = -pitch_amplitude_deg * std::numbers::pi / 180.0 * w * std::cos(w * t);
      const Eigen::Vector2d xa(pitch_axis * chord, 0.0);
      Eigen::Matrix2d dR;
      dR << -std::sin(a), -std::cos(a), std::cos(a), -std::sin(a);
      return adot * (dR * (x - xa));
    }
  }
  return Eigen::Vector2d::Zero();
}

// ---------------------------------------------------------- temporal basis

TemporalBasis TemporalBasis::make(TemporalKind kind, int n_el, int degree) {
  TemporalBasis b;
  b.kind = kind;
  if (kind == TemporalKind::Steady) {
    b.degree = 0;
    b.n_el = 1;
    return b;
  }
  if (degree < 1 || degree > nurbs::kMaxDegree) throw std::invalid_argument("temporal degree must be in [1,3]");
  if (n_el < 1) throw std::invalid_argument("need at least one temporal element");
  b.degree = degree;
  b.n_el = n_el;
  if (kind == TemporalKind::OpenC0) {
    b.kv = nurbs::uniform_knots(degree, n_el);
  } else {
    if (n_el < degree + 1) throw std::invalid_argument("periodic temporal basis needs n_el >= p+1");
    std::vector<double> k;
    for (int i = 0; i <= n_el + 2 * degree; ++i) k.push_back(static_cast<double>(i - degree) / n_el);
    b.kv = KnotVector(degree, k);
  }
  return b;
}

int TemporalBasis::num_levels() const {
  switch (kind) {
    case TemporalKind::Steady:
      return 1;
    case TemporalKind::OpenC0:
      return n_el + degree;
    case TemporalKind::Periodic:
      return n_el;
  }
  return 1;
}

int TemporalBasis::num_leaders() const {
  return kind == TemporalKind::OpenC0 ? num_levels() - 1 : num_levels();
}

int TemporalBasis::leader(int level) const {
  if (kind == TemporalKind::OpenC0 && level == num_levels() - 1) return 0;
  return level;
}

int TemporalBasis::level(int span, int j) const {
  switch (kind) {
    case TemporalKind::Steady:
      return 0;
    case TemporalKind::OpenC0:
      return span + j;
    case TemporalKind::Periodic:
      return (span + j) % n_el;
  }
  return 0;
}

double TemporalBasis::span_begin(int span) const {
  return kind == TemporalKind::Steady ? 0.0 : static_cast<double>(span) / n_el;
}
double TemporalBasis::span_end(int span) const {
  return kind == TemporalKind::Steady ? 1.0 : static_cast<double>(span + 1) / n_el;
}

void TemporalBasis::eval(int span, double xi, double* N, double* dN) const {
  if (kind == TemporalKind::Steady) {
    N[0] = 1.0;
    dN[0] = 0.0;
    return;
  }
  const auto b = nurbs::eval_basis_ders(kv, span + degree, xi, 1);
  for (int j = 0; j <= degree; ++j) {
    N[j] = b.ders[0][j];
    dN[j] = b.ders[1][j];
  }
}

std::vector<double> TemporalBasis::sample_params() const {
  if (kind == TemporalKind::Steady) return {0.0};
  auto g = kv.greville();
  if (kind == TemporalKind::OpenC0) return g;
  std::vector<double> out(n_el);
  for (int k = 0; k < n_el; ++k) {
    double x = std::fmod(g[k], 1.0);
    if (x < 0) x += 1.0;
    out[k] = x;
  }
  return out;
}

const char* to_string(FaceTag tag) {
  switch (tag) {
    case FaceTag::Interior:
      return "P_int";
    case FaceTag::Dirichlet:
      return "P_ext_D";
    case FaceTag::Neumann:
      return "P_ext_N";
    case FaceTag::Initial:
      return "Omega_0";
    case FaceTag::Final:
      return "Omega_T";
  }
  return "?";
}

// ------------------------------------------------------------- extrusion

namespace {

// Control levels reproducing the motion samples of every control point.
std::vector<std::vector<double>> interpolate_levels(const SpatialMesh& sp, const MotionSpec& motion,
                                                    const TemporalBasis& tb, double T) {
  const int ncp = sp.num_cps();
  const auto params = tb.sample_params();
  const int nl = tb.num_levels();
  Eigen::MatrixXd samples(nl, 2 * ncp);
  for (int j = 0; j < nl; ++j) {
    const double t = T * params[j];
    for (int a = 0; a < ncp; ++a) {
      const Eigen::Vector2d x = motion.apply(Eigen::Vector2d(sp.cp_xy[2 * a], sp.cp_xy[2 * a + 1]), t);
      samples(j, 2 * a) = x[0];
      samples(j, 2 * a + 1) = x[1];
    }
  }
  Eigen::MatrixXd ctrl;
  if (tb.kind == TemporalKind::Steady) {
    ctrl = samples;
  } else if (tb.kind == TemporalKind::OpenC0) {
    ctrl = nurbs::interpolate_on_knots(tb.kv, params, samples);
  } else {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nl, nl);
    double N[nurbs::kMaxDegree + 1], dN[nurbs::kMaxDegree + 1];
    for (int j = 0; j < nl; ++j) {
      const int span = std::min(static_cast<int>(params[j] * tb.n_el), tb.n_el - 1);
      tb.eval(span, params[j], N, dN);
      for (int k = 0; k <= tb.degree; ++k) A(j, tb.level(span, k)) += N[k];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) throw StructureError("periodic temporal interpolation matrix is singular");
    ctrl = lu.solve(samples);
  }
  std::vector<std::vector<double>> levels(nl, std::vector<double>(2 * ncp));
  for (int j = 0; j < nl; ++j)
    for (int k = 0; k < 2 * ncp; ++k) levels[j][k] = ctrl(j, k);
  if (tb.kind == TemporalKind::OpenC0) {
    double dev = 0.0, scale = 1.0;
    for (int k = 0; k < 2 * ncp; ++k) {
      dev = std::max(dev, std::abs(levels[nl - 1][k] - levels[0][k]));
      scale = std::max(scale, std::abs(levels[0][k]));
    }
    if (dev > 1e-12 * scale)
      throw StructureError("end slices are not congruent (deviation " + std::to_string(dev) +
                           "): motion is not periodic with the mesh period");
    levels[nl - 1] = levels[0];
  }
  return levels;
}

void build_topology(SpaceTimeMesh& m) {
  const auto& sp = m.spatial;
  const int p = sp.degree;
  m.sp_elems.clear();
  m.edges.clear();
  for (size_t ip = 0; ip < sp.patches.size(); ++ip) {
    const auto& patch = sp.patches[ip];
    const auto su = patch.knots[0].span_indices();
    const auto sv = patch.knots[1].span_indices();
    const int nu = patch.knots[0].num_basis();
    std::vector<std::vector<int>> id(su.size(), std::vector<int>(sv.size()));
    for (size_t jv = 0; jv < sv.size(); ++jv)
      for (size_t iu = 0; iu < su.size(); ++iu) {
        SpatialElement el;
        el.patch = static_cast<int>(ip);
        el.span_u = su[iu];
        el.span_v = sv[jv];
        el.u0 = patch.knots[0].knots[su[iu]];
        el.u1 = patch.knots[0].knots[su[iu] + 1];
        el.v0 = patch.knots[1].knots[sv[jv]];
        el.v1 = patch.knots[1].knots[sv[jv] + 1];
        for (int b = 0; b <= p; ++b)
          for (int a = 0; a <= p; ++a)
            el.cps.push_back(sp.cp_map[ip][(su[iu] - p + a) + nu * (sv[jv] - p + b)]);
        id[iu][jv] = static_cast<int>(m.sp_elems.size());
        m.sp_elems.push_back(std::move(el));
      }
    for (int side = 0; side < 4; ++side) {
      const SideKind kind = sp.sides[ip][side];
      if (kind == SideKind::Interface) continue;
      const FaceTag tag = kind == SideKind::Interior ? FaceTag::Interior : FaceTag::Dirichlet;
      if (side < 2) {
        const size_t iu = side == 0 ? 0 : su.size() - 1;
        for (size_t jv = 0; jv < sv.size(); ++jv) m.edges.push_back({id[iu][jv], side, tag});
      } else {
        const size_t jv = side == 2 ? 0 : sv.size() - 1;
        for (size_t iu = 0; iu < su.size(); ++iu) m.edges.push_back({id[iu][jv], side, tag});
      }
    }
  }
}

}  // namespace

SpaceTimeMesh build_spacetime_mesh(const SpatialMesh& spatial, const MotionSpec& motion,
                                   const TemporalSpec& temporal, double s,
                                   const Eigen::Vector2d& free_stream) {
  if (!(s > 0)) throw std::invalid_argument("space-time velocity scale s must be positive");
  SpaceTimeMesh m;
  m.spatial = spatial;
  m.motion = motion;
  m.s = s;
  if (temporal.kind == TemporalKind::Steady) {
    m.time = TemporalBasis::make(TemporalKind::Steady, 1, 0);
    m.period = 1.0;
    m.motion.kind = MotionKind::Stationary;
  } else {
    if (temporal.n_el < 1) throw std::invalid_argument("n_el_t must be >= 1");
    motion.validate();
    m.time = TemporalBasis::make(temporal.kind, temporal.n_el, temporal.degree);
    m.period = motion.period;
    if (!(m.period > 0)) throw std::invalid_argument("period must be positive");
  }
  m.level_xy = interpolate_levels(m.spatial, m.motion, m.time, m.period);
  build_topology(m);
  classify_exterior(m, free_stream);
  return m;
}

SpaceTimeMesh build_steady_mesh(const SpatialMesh& spatial, const Eigen::Vector2d& free_stream) {
  return build_spacetime_mesh(spatial, MotionSpec{}, TemporalSpec{TemporalKind::Steady, 1, 0}, 1.0,
                              free_stream);
}

// ------------------------------------------------------------ evaluation

void SpaceTimeMesh::local_nodes(int e, int* nodes) const {
  const auto& el = sp_elems[sp_elem_of(e)];
  const int ts = t_span_of(e);
  const int nsp = static_cast<int>(el.cps.size());
  const int ncp = num_cps();
  for (int j = 0; j < time.num_local(); ++j) {
    const int lead = time.leader(time.level(ts, j));
    for (int a = 0; a < nsp; ++a) nodes[a + nsp * j] = lead * ncp + el.cps[a];
  }
}

void SpaceTimeMesh::eval_point(int e, const double* xi, PointEval& out, bool hessian) const {
  const int ise = sp_elem_of(e);
  const auto& el = sp_elems[ise];
  const auto& patch = spatial.patches[el.patch];
  const int p = spatial.degree;
  const int ts = t_span_of(e);
  const int nd = std::min(2, p);
  const double hu = el.u1 - el.u0, hv = el.v1 - el.v0;
  const auto bu = nurbs::eval_basis_ders(patch.knots[0], el.span_u, el.u0 + xi[0] * hu, nd);
  const auto bv = nurbs::eval_basis_ders(patch.knots[1], el.span_v, el.v0 + xi[1] * hv, nd);
  const int nsp = (p + 1) * (p + 1);

  // Rational spatial basis and its local-parameter derivatives (00, 01, 11).
  double R[16], R0[16], R1[16], R00[16], R01[16], R11[16];
  double W = 0, W0 = 0, W1 = 0, W00 = 0, W01 = 0, W11 = 0;
  for (int b = 0; b <= p; ++b)
    for (int a = 0; a <= p; ++a) {
      const int k = a + (p + 1) * b;
      const double w = spatial.cp_w[el.cps[k]];
      const double nu = bu.ders[0][a], nu1 = bu.ders[1][a] * hu, nu2 = nd > 1 ? bu.ders[2][a] * hu * hu : 0.0;
      const double nv = bv.ders[0][b], nv1 = bv.ders[1][b] * hv, nv2 = nd > 1 ? bv.ders[2][b] * hv * hv : 0.0;
      R[k] = w * nu * nv;
      R0[k] = w * nu1 * nv;
      R1[k] = w * nu * nv1;
      R00[k] = w * nu2 * nv;
      R01[k] = w * nu1 * nv1;
      R11[k] = w * nu * nv2;
      W += R[k];
      W0 += R0[k];
      W1 += R1[k];
      W00 += R00[k];
      W01 += R01[k];
      W11 += R11[k];
    }
  for (int k = 0; k < nsp; ++k) {
    const double r = R[k] / W;
    const double r0 = (R0[k] - r * W0) / W;
    const double r1 = (R1[k] - r * W1) / W;
    R00[k] = (R00[k] - 2 * W0 * r0 - r * W00) / W;
    R01[k] = (R01[k] - W0 * r1 - W1 * r0 - r * W01) / W;
    R11[k] = (R11[k] - 2 * W1 * r1 - r * W11) / W;
    R[k] = r;
    R0[k] = r0;
    R1[k] = r1;
  }

  const int nt = time.num_local();
  double Nt[nurbs::kMaxDegree + 1], dNt[nurbs::kMaxDegree + 1];
  const double tb = time.span_begin(ts), te = time.span_end(ts);
  const double ht = te - tb;
  time.eval(ts, tb + xi[2] * ht, Nt, dNt);
  for (int j = 0; j < nt; ++j) dNt[j] *= ht;

  // Geometry.
  Eigen::Vector2d x = Eigen::Vector2d::Zero(), x0 = x, x1 = x, x2 = x, x00 = x, x01 = x, x11 = x;
  for (int j = 0; j < nt; ++j) {
    const auto& lx = level_xy[time.level(ts, j)];
    for (int k = 0; k < nsp; ++k) {
      const Eigen::Vector2d P(lx[2 * el.cps[k]], lx[2 * el.cps[k] + 1]);
      x += Nt[j] * R[k] * P;
      x0 += Nt[j] * R0[k] * P;
      x1 += Nt[j] * R1[k] * P;
      x2 += dNt[j] * R[k] * P;
      x00 += Nt[j] * R00[k] * P;
      x01 += Nt[j] * R01[k] * P;
      x11 += Nt[j] * R11[k] * P;
    }
  }
  out.xhat << x[0], x[1], s * period * (tb + xi[2] * ht);
  out.J << x0[0], x1[0], x2[0], x0[1], x1[1], x2[1], 0.0, 0.0, s * period * ht;
  const double det = out.J.determinant();
  const double scale = out.J.block<2, 2>(0, 0).norm();
  if (!(std::abs(det) > 1e-14 * scale * scale * out.J(2, 2)) || !std::isfinite(det))
    throw GeometryError("singular space-time Jacobian", e);
  out.detJ = std::abs(det);
  out.Jinv = out.J.inverse();
  out.Ghat = out.Jinv.transpose() * out.Jinv;
  const Eigen::Matrix2d B = out.J.block<2, 2>(0, 0).inverse();
  out.G = B.transpose() * B;

  out.nb = nsp * nt;
  // Q_kl = sum_m (dxi_k/dx_m)(dxi_l/dx_m) over spatial m.
  double Q00 = 0, Q01 = 0, Q11 = 0;
  for (int mm = 0; mm < 2; ++mm) {
    Q00 += out.Jinv(0, mm) * out.Jinv(0, mm);
    Q01 += out.Jinv(0, mm) * out.Jinv(1, mm);
    Q11 += out.Jinv(1, mm) * out.Jinv(1, mm);
  }
  const auto& Ji = out.Jinv;
  for (int j = 0; j < nt; ++j)
    for (int k = 0; k < nsp; ++k) {
      const int a = k + nsp * j;
      const double g0 = R0[k] * Nt[j], g1 = R1[k] * Nt[j], g2 = R[k] * dNt[j];
      out.N[a] = R[k] * Nt[j];
      for (int c = 0; c < 3; ++c) out.dN[a][c] = Ji(0, c) * g0 + Ji(1, c) * g1 + Ji(2, c) * g2;
      if (hessian) {
        const double d0 = out.dN[a][0], d1 = out.dN[a][1];
        const double M00 = R00[k] * Nt[j] - d0 * x00[0] - d1 * x00[1];
        const double M01 = R01[k] * Nt[j] - d0 * x01[0] - d1 * x01[1];
        const double M11 = R11[k] * Nt[j] - d0 * x11[0] - d1 * x11[1];
        out.lapN[a] = Q00 * M00 + 2 * Q01 * M01 + Q11 * M11;
      } else {
        out.lapN[a] = 0.0;
      }
    }
}

void SpaceTimeMesh::face_to_local(int edge, double a, double b, double* xi) const {
  const int side = edges[edge].side;
  if (side < 2) {
    xi[0] = side == 0 ? 0.0 : 1.0;
    xi[1] = a;
  } else {
    xi[0] = a;
    xi[1] = side == 2 ? 0.0 : 1.0;
  }
  xi[2] = b;
}

BoundaryNormal split_normal(const Eigen::Vector3d& nhat, double s) {
  BoundaryNormal r;
  r.nhat = nhat;
  const double ns = std::hypot(nhat[0], nhat[1]);
  if (!(ns > 1e-300)) throw StructureError("purely temporal face: v_n undefined");
  r.n = Eigen::Vector2d(nhat[0], nhat[1]) / ns;
  r.vn = -s * nhat[2] / ns;
  return r;
}

void SpaceTimeMesh::eval_face(int edge, int t_span, const double* xi, PointEval& pe, FaceEval& fe) const {
  const auto& ed = edges[edge];
  const int e = ed.sp_elem + static_cast<int>(sp_elems.size()) * t_span;
  eval_point(e, xi, pe, false);
  const int k = ed.side < 2 ? 0 : 1;
  const double sign = (ed.side % 2 == 0) ? -1.0 : 1.0;
  Eigen::Vector3d nh = sign * pe.Jinv.row(k).transpose();
  nh.normalize();
  const auto bn = split_normal(nh, s);
  fe.nhat = nh;
  fe.n = bn.n;
  fe.vn = bn.vn;
  fe.g = s * pe.J.block<2, 1>(0, 2) / pe.J(2, 2);
  const int along = 1 - k;
  fe.dsigma = pe.J.block<2, 1>(0, along).norm() * pe.J(2, 2);
}

std::vector<FaceRef> SpaceTimeMesh::faces() const {
  std::vector<FaceRef> out;
  for (int ts = 0; ts < num_t_spans(); ++ts)
    for (size_t ie = 0; ie < edges.size(); ++ie)
      out.push_back({static_cast<int>(ie), ts, edges[ie].sp_elem, edges[ie].tag});
  if (!steady())
    for (size_t k = 0; k < sp_elems.size(); ++k) {
      out.push_back({-1, 0, static_cast<int>(k), FaceTag::Initial});
      out.push_back({-1, num_t_spans() - 1, static_cast<int>(k), FaceTag::Final});
    }
  return out;
}

std::pair<int, double> SpaceTimeMesh::locate_time(double t) const {
  if (steady()) return {0, 0.0};
  const double x = std::clamp(t / period, 0.0, 1.0) * time.n_el;
  const int ts = std::min(static_cast<int>(x), time.n_el - 1);
  return {ts, x - ts};
}

double SpaceTimeMesh::spatial_area(double t) const {
  const auto [ts, loc] = locate_time(t);
  const auto q = make_quadrature({degree() + 1, degree() + 1});
  double area = 0;
  PointEval pe;
  for (size_t k = 0; k < sp_elems.size(); ++k)
    for (int iq = 0; iq < q.size(); ++iq) {
      const double xi[3] = {q.point(iq)[0], q.point(iq)[1], loc};
      eval_point(static_cast<int>(k) + static_cast<int>(sp_elems.size()) * ts, xi, pe, false);
      area += q.weights[iq] * pe.detJ / pe.J(2, 2);
    }
  return area;
}

double SpaceTimeMesh::interior_boundary_length(double t) const {
  const auto [ts, loc] = locate_time(t);
  const auto g = gauss_legendre(degree() + 2);
  double len = 0;
  PointEval pe;
  FaceEval fe;
  for (size_t ie = 0; ie < edges.size(); ++ie) {
    if (edges[ie].tag != FaceTag::Interior) continue;
    for (size_t iq = 0; iq < g.points.size(); ++iq) {
      double xi[3];
      face_to_local(static_cast<int>(ie), g.points[iq], loc, xi);
      eval_face(static_cast<int>(ie), ts, xi, pe, fe);
      len += g.weights[iq] * fe.dsigma / pe.J(2, 2);
    }
  }
  return len;
}

void classify_exterior(SpaceTimeMesh& m, const Eigen::Vector2d& fs) {
  if (fs.norm() == 0.0) throw std::invalid_argument("free stream must be nonzero");
  const auto g = gauss_legendre(m.degree() + 2);
  PointEval pe;
  FaceEval fe;
  for (size_t ie = 0; ie < m.edges.size(); ++ie) {
    auto& ed = m.edges[ie];
    if (ed.tag == FaceTag::Interior) continue;
    double flux = 0;
    for (size_t iq = 0; iq < g.points.size(); ++iq) {
      double xi[3];
      m.face_to_local(static_cast<int>(ie), g.points[iq], 0.0, xi);
      m.eval_face(static_cast<int>(ie), 0, xi, pe, fe);
      flux += g.weights[iq] * fs.dot(fe.n) * fe.dsigma;
    }
    ed.tag = flux < 0.0 ? FaceTag::Dirichlet : FaceTag::Neumann;
  }
}

MetricPair compute_metrics(const SpaceTimeMesh& mesh, int element, const double* xi) {
  PointEval pe;
  mesh.eval_point(element, xi, pe, false);
  MetricPair mp;
  mp.Ghat = pe.Ghat;
  mp.G = pe.G;
  mp.G_dot_G = (pe.G.array() * pe.G.array()).sum();
  mp.trace_G = pe.G.trace();
  mp.detJ = pe.detJ;
  return mp;
}

BoundaryNormal boundary_normal(const SpaceTimeMesh& mesh, const FaceRef& face, const double* xi_face) {
  if (face.tag == FaceTag::Initial || face.tag == FaceTag::Final || face.edge < 0)
    throw StructureError("v_n is undefined on the temporal faces Omega_0 / Omega_T");
  double xi[3];
  mesh.face_to_local(face.edge, xi_face[0], xi_face[1], xi);
  PointEval pe;
  FaceEval fe;
  mesh.eval_face(face.edge, face.t_span, xi, pe, fe);
  return BoundaryNormal{fe.nhat, fe.n, fe.vn};
}

Eigen::Vector2d mesh_boundary_velocity(const SpaceTimeMesh& mesh, const FaceRef& face, const double* xi_face) {
  if (face.edge < 0 || mesh.edges[face.edge].tag != FaceTag::Interior)
    throw StructureError("boundary velocity requested on a face outside P_int");
  double xi[3];
  mesh.face_to_local(face.edge, xi_face[0], xi_face[1], xi);
  PointEval pe;
  FaceEval fe;
  mesh.eval_face(face.edge, face.t_span, xi, pe, fe);
  return fe.g;
}

void SpaceTimeMesh::dump(std::ostream& os) const {
  os << "# space-time mesh\n";
  os << "spatial_degree " << degree() << "\n";
  os << "temporal " << (steady() ? "steady" : time.kind == TemporalKind::OpenC0 ? "open_c0" : "periodic")
     << " degree " << time.degree << " n_el " << time.n_el << " period " << period << " s " << s << "\n";
  os << "patches " << spatial.patches.size() << "\n";
  for (size_t ip = 0; ip < spatial.patches.size(); ++ip) {
    const auto& p = spatial.patches[ip];
    os << "patch " << ip << " " << spatial.patch_names[ip] << "\n";
    for (int d = 0; d < 2; ++d) {
      os << "  knots" << d << " p=" << p.knots[d].degree << ":";
      for (double k : p.knots[d].knots) os << " " << k;
      os << "\n";
    }
    os << "  control_points " << p.num_control_points() << "\n";
    for (int a = 0; a < p.num_control_points(); ++a)
      os << "    " << spatial.cp_map[ip][a] << " " << p.coords[2 * a] << " " << p.coords[2 * a + 1] << " "
         << p.weights[a] << "\n";
  }
  os << "levels " << level_xy.size() << " control_points " << num_cps() << "\n";
  os << "edges " << edges.size() << "\n";
  for (const auto& e : edges)
    os << "  " << e.sp_elem << " patch " << sp_elems[e.sp_elem].patch << " side " << e.side << " "
       << to_string(e.tag) << "\n";
}

}  // namespace stflow
