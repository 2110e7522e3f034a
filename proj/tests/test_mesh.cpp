#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fixtures.hpp"
#include "stflow/errors.hpp"
#include "stflow/mesh.hpp"
#include "stflow/quadrature.hpp"

using namespace stflow;

namespace {

constexpr double kPi = std::numbers::pi;

int patch_index(const SpatialMesh& m, const std::string& name) {
  for (size_t i = 0; i < m.patch_names.size(); ++i)
    if (m.patch_names[i] == name) return static_cast<int>(i);
  return -1;
}

Eigen::Vector2d patch_point(const SpatialMesh& m, int ip, double u, double v) {
  const double xi[2] = {u, v};
  const auto g = nurbs::eval_geometry(m.patches[ip], xi);
  return {g.x[0], g.x[1]};
}

// Physical position of the space-time mesh at element-local xi of element e.
Eigen::Vector3d st_point(const SpaceTimeMesh& m, int e, double a, double b, double c) {
  PointEval pe;
  const double xi[3] = {a, b, c};
  m.eval_point(e, xi, pe, false);
  return pe.xhat;
}

// First boundary edge on the foil whose element lies in the given patch.
int foil_edge(const SpaceTimeMesh& m, const std::string& patch) {
  const int ip = patch_index(m.spatial, patch);
  for (size_t ie = 0; ie < m.edges.size(); ++ie)
    if (m.edges[ie].tag == FaceTag::Interior && m.sp_elems[m.edges[ie].sp_elem].patch == ip)
      return static_cast<int>(ie);
  return -1;
}

MotionSpec heave_motion(double T) {
  MotionSpec mo;
  mo.kind = MotionKind::Heave;
  mo.heave_amplitude = 0.5;
  mo.period = T;
  return mo;
}

MotionSpec pitch_motion(double T) {
  MotionSpec mo;
  mo.kind = MotionKind::Pitch;
  mo.pitch_amplitude_deg = 10.0;
  mo.period = T;
  return mo;
}

SpatialMesh coarse_foil() {
  SpatialMeshSpec spec;
  spec.level = -1;
  return build_spatial_mesh(spec);
}

}  // namespace

TEST_CASE("NACA parsing and thickness") {
  CHECK(parse_naca("0012").thickness == doctest::Approx(0.12));
  CHECK(parse_naca("NACA0015").thickness == doctest::Approx(0.15));
  CHECK_THROWS_AS(parse_naca("2412"), ParseError);
  CHECK_THROWS_AS(parse_naca("12"), ParseError);
  CHECK_THROWS_AS(parse_naca("00x2"), ParseError);
  CHECK_THROWS_AS(parse_naca("0000"), ParseError);
  // Maximum thickness sits near x = 0.3c.
  CHECK(2 * naca_half_thickness(parse_naca("0012"), 1.0, 0.3) == doctest::Approx(0.12).epsilon(1e-3 / 0.12));
  CHECK(2 * naca_half_thickness(parse_naca("0015"), 1.0, 0.3) == doctest::Approx(0.15).epsilon(1e-3 / 0.15));
  CHECK(naca_half_thickness(parse_naca("0012"), 1.0, 0.0) == 0.0);
  CHECK(std::abs(naca_half_thickness(parse_naca("0012"), 1.0, 1.0)) < 1e-15);
  CHECK(naca_half_thickness(parse_naca("0012"), 2.0, 0.6) == doctest::Approx(2 * naca_half_thickness(parse_naca("0012"), 1.0, 0.3)));
}

TEST_CASE("spatial mesh topology and foil fidelity") {
  SpatialMeshSpec spec;
  const auto m = build_spatial_mesh(spec);
  REQUIRE(m.patches.size() == 6);
  const NacaSection sec = parse_naca(spec.naca);

  SUBCASE("foil surface within 1e-3 of the section") {
    for (const std::string part : {"nose", "tail"})
      for (const std::string side : {"upper", "lower"}) {
        const int ip = patch_index(m, side + "_" + part);
        REQUIRE(ip >= 0);
        const double sgn = side == "upper" ? 1.0 : -1.0;
        double worst = 0;
        for (int k = 0; k <= 200; ++k) {
          const auto x = patch_point(m, ip, k / 200.0, 0.0);
          worst = std::max(worst, std::abs(x[1] - sgn * naca_half_thickness(sec, 1.0, x[0])));
        }
        CHECK(worst < 1e-3);
      }
  }

  SUBCASE("patch interfaces are conforming") {
    const int un = patch_index(m, "upper_nose"), ut = patch_index(m, "upper_tail"),
              uw = patch_index(m, "upper_wake"), lw = patch_index(m, "lower_wake");
    for (int k = 0; k <= 20; ++k) {
      const double v = k / 20.0;
      CHECK((patch_point(m, un, 1, v) - patch_point(m, ut, 0, v)).norm() < 1e-12);
      CHECK((patch_point(m, ut, 1, v) - patch_point(m, uw, 0, v)).norm() < 1e-12);
      CHECK((patch_point(m, uw, v, 0) - patch_point(m, lw, v, 0)).norm() < 1e-12);
    }
    int total = 0;
    for (const auto& p : m.patches) total += p.num_control_points();
    CHECK(m.num_cps() < total);
  }

  SUBCASE("far-field extents") {
    const int un = patch_index(m, "upper_nose");
    const auto le = patch_point(m, un, 0, 1);
    CHECK(le[0] == doctest::Approx(0.15 - 8.0).epsilon(1e-12));
    const auto out = patch_point(m, patch_index(m, "upper_wake"), 1, 0);
    CHECK(out[0] == doctest::Approx(9.0));
  }

  SUBCASE("level halving and bisection") {
    SpatialMeshSpec s1 = spec;
    s1.level = -1;
    const auto c = build_spatial_mesh(s1);
    CHECK(c.patches[0].knots[0].span_indices().size() == 5);
    CHECK(c.patches[1].knots[0].span_indices().size() == 10);
    CHECK(c.patches[2].knots[0].span_indices().size() == 23);
    CHECK(c.patches[0].knots[1].span_indices().size() == 8);
    s1.level = 1;
    const auto f = build_spatial_mesh(s1);
    CHECK(f.patches[0].knots[0].span_indices().size() == 20);
    CHECK(f.patches[2].knots[1].span_indices().size() == 30);
  }

  SUBCASE("invalid inputs") {
    SpatialMeshSpec bad = spec;
    bad.n_nose = 0;
    CHECK_THROWS_AS(build_spatial_mesh(bad), std::invalid_argument);
    bad = spec;
    bad.chord = -1;
    CHECK_THROWS_AS(build_spatial_mesh(bad), std::invalid_argument);
    bad = spec;
    bad.naca = "4412";
    CHECK_THROWS_AS(build_spatial_mesh(bad), ParseError);
  }
}

TEST_CASE("spatial area matches the analytic domain") {
  SpatialMeshSpec spec;
  const auto st = build_steady_mesh(build_spatial_mesh(spec));
  const NacaSection sec = parse_naca(spec.naca);
  const double xs = 0.15, R = 8.0, L = 9.0, tf = std::tan(8.0 * kPi / 180.0);
  // Area of the half disc, the flared strips behind it and minus the foil.
  const auto g = gauss_legendre(10);
  double foil = 0;
  for (int k = 0; k < 200; ++k)
    for (size_t q = 0; q < g.points.size(); ++q) {
      const double s = (k + g.points[q]) / 200.0;
      foil += g.weights[q] / 200.0 * 2 * s * naca_half_thickness(sec, 1.0, s * s);  // x = s^2
    }
  const double strips = R * (L - xs) + 0.5 * tf * (L - xs) * (L - xs);
  const double area = kPi * R * R / 2 + 2 * strips - 2 * foil;
  CHECK(st.spatial_area(0.0) == doctest::Approx(area).epsilon(1e-4));
}

TEST_CASE("exterior classification from the free stream") {
  const auto sp = coarse_foil();
  auto count = [](const SpaceTimeMesh& m, FaceTag t) {
    int n = 0;
    for (const auto& e : m.edges) n += e.tag == t;
    return n;
  };
  auto m = build_steady_mesh(sp, {1.0, 0.0});
  const int nd = count(m, FaceTag::Dirichlet), nn = count(m, FaceTag::Neumann);
  CHECK(nd > 0);
  CHECK(nn > 0);
  // Outflow edges: exterior sides of wake patches at u = 1.
  for (const auto& e : m.edges) {
    if (e.tag == FaceTag::Interior) continue;
    const auto& pn = m.spatial.patch_names[m.sp_elems[e.sp_elem].patch];
    const bool outflow = pn.find("wake") != std::string::npos && e.side == 1;
    CHECK((e.tag == FaceTag::Neumann) == outflow);
  }
  // Reversing the stream turns the outflow plane into inflow.
  classify_exterior(m, {-1.0, 0.0});
  for (const auto& e : m.edges) {
    const auto& pn = m.spatial.patch_names[m.sp_elems[e.sp_elem].patch];
    if (pn.find("wake") != std::string::npos && e.side == 1) CHECK(e.tag == FaceTag::Dirichlet);
  }
  CHECK(count(m, FaceTag::Interior) == count(build_steady_mesh(sp), FaceTag::Interior));
  CHECK_THROWS_AS(classify_exterior(m, {0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("metrics of an affine brick") {
  const auto sp = testing::box_mesh(4, 2, 2.0, 3.0);
  MotionSpec mo;
  mo.period = 5.0;
  const auto m = build_spacetime_mesh(sp, mo, {TemporalKind::OpenC0, 5, 2}, 1.0);
  const double hx = 0.5, hy = 1.5, ht = 1.0;
  const double xi[3] = {0.3, 0.6, 0.2};
  for (int e : {0, 3, m.num_elements() - 1}) {
    const auto mp = compute_metrics(m, e, xi);
    CHECK(mp.detJ == doctest::Approx(hx * hy * ht));
    CHECK(mp.G(0, 0) == doctest::Approx(1 / (hx * hx)));
    CHECK(mp.G(1, 1) == doctest::Approx(1 / (hy * hy)));
    CHECK(std::abs(mp.G(0, 1)) < 1e-12);
    CHECK(mp.Ghat(2, 2) == doctest::Approx(1 / (ht * ht)));
    CHECK(mp.trace_G == doctest::Approx(1 / (hx * hx) + 1 / (hy * hy)));
    CHECK(mp.G_dot_G == doctest::Approx(1 / std::pow(hx, 4) + 1 / std::pow(hy, 4)));
  }
  // Space-time volume = s T |Omega|.
  const auto q = make_quadrature({3, 3, 3});
  double vol = 0;
  PointEval pe;
  for (int e = 0; e < m.num_elements(); ++e)
    for (int iq = 0; iq < q.size(); ++iq) {
      m.eval_point(e, q.point(iq), pe, false);
      vol += q.weights[iq] * pe.detJ;
    }
  CHECK(vol == doctest::Approx(5.0 * 6.0));
}

TEST_CASE("physical derivatives on a sheared heaving patch") {
  const auto sp = testing::box_mesh(3, 2, 2.0, 1.0, 2, 0.4);
  auto mo = heave_motion(2.0);
  const auto m = build_spacetime_mesh(sp, mo, {TemporalKind::OpenC0, 4, 2}, 1.0);
  const double h = 1e-6;
  for (int e : {1, 7, 20}) {
    const double xi[3] = {0.37, 0.61, 0.45};
    PointEval pe, pp, pm;
    m.eval_point(e, xi, pe, true);
    CHECK((pe.J * pe.Jinv - Eigen::Matrix3d::Identity()).norm() < 1e-12);
    for (int k = 0; k < 3; ++k) {
      double xp[3] = {xi[0], xi[1], xi[2]}, xm[3] = {xi[0], xi[1], xi[2]};
      xp[k] += h;
      xm[k] -= h;
      m.eval_point(e, xp, pp, false);
      m.eval_point(e, xm, pm, false);
      const Eigen::Vector3d dx = (pp.xhat - pm.xhat) / (2 * h);
      CHECK((dx - pe.J.col(k)).norm() < 1e-7);
      for (int a = 0; a < pe.nb; ++a) {
        const double dN = (pp.N[a] - pm.N[a]) / (2 * h);
        double chain = 0;
        for (int J = 0; J < 3; ++J) chain += pe.dN[a][J] * pe.J(J, k);
        CHECK(std::abs(dN - chain) < 1e-7);
      }
    }
  }
}

TEST_CASE("Laplacian reproduces |x|^2 on an affine patch") {
  // On an affine patch the quadratic B-spline space contains x^2 + y^2. Its
  // coefficients follow from the blossoms: u^2 -> t_{i+1} t_{i+2}, u -> greville.
  const double Lx = 2.0, Ly = 1.0, sh = 0.3;
  const auto sp = testing::box_mesh(3, 2, Lx, Ly, 2, sh);
  const auto m = build_steady_mesh(sp);
  const auto& P = sp.patches[0];
  const auto& ku = P.knots[0].knots;
  const auto& kv = P.knots[1].knots;
  const auto gu = P.knots[0].greville(), gv = P.knots[1].greville();
  std::vector<double> coef(m.num_nodes() * 3, 0.0);
  // x = Lx u + sh Ly v, y = Ly v:  x^2 + y^2 = Lx^2 u^2 + 2 Lx sh Ly u v + (sh^2 + 1) Ly^2 v^2
  for (size_t j = 0; j < gv.size(); ++j)
    for (size_t i = 0; i < gu.size(); ++i) {
      const double uu = ku[i + 1] * ku[i + 2], vv = kv[j + 1] * kv[j + 2];
      const double c = Lx * Lx * uu + 2 * Lx * sh * Ly * gu[i] * gv[j] + (sh * sh + 1) * Ly * Ly * vv;
      coef[3 * sp.cp_map[0][i + gu.size() * j]] = c;
    }
  PointEval pe;
  int nodes[kMaxLocal];
  for (int e = 0; e < m.num_elements(); ++e) {
    const double xi[3] = {0.3, 0.7, 0.5};
    m.eval_point(e, xi, pe, true);
    m.local_nodes(e, nodes);
    double f = 0, lap = 0, fx = 0;
    for (int a = 0; a < pe.nb; ++a) {
      f += coef[3 * nodes[a]] * pe.N[a];
      fx += coef[3 * nodes[a]] * pe.dN[a][0];
      lap += coef[3 * nodes[a]] * pe.lapN[a];
    }
    CHECK(f == doctest::Approx(pe.xhat[0] * pe.xhat[0] + pe.xhat[1] * pe.xhat[1]));
    CHECK(fx == doctest::Approx(2 * pe.xhat[0]));
    CHECK(lap == doctest::Approx(4.0));
  }
}

TEST_CASE("heave trajectory of the space-time mesh") {
  const auto sp = coarse_foil();
  const double T = kPi / 0.5;  // k = 0.5, U = c = 1
  auto error = [&](int n_el, double& gerr) {
    const auto m = build_spacetime_mesh(sp, heave_motion(T), {TemporalKind::OpenC0, n_el, 2}, 1.0);
    const int ie = foil_edge(m, "upper_tail");
    const int nsp = static_cast<int>(m.sp_elems.size());
    const auto x0 = st_point(m, m.edges[ie].sp_elem, 0.5, 0.0, 0.0);
    double err = 0;
    gerr = 0;
    PointEval pe;
    FaceEval fe;
    for (int ts = 0; ts < n_el; ++ts)
      for (double c : {0.0, 0.31, 0.77}) {
        const auto x = st_point(m, m.edges[ie].sp_elem + nsp * ts, 0.5, 0.0, c);
        const double t = x[2];
        err = std::max(err, std::abs(x[1] - x0[1] - m.motion.heave(t)));
        err = std::max(err, std::abs(x[0] - x0[0]));
        const double xi[3] = {0.5, 0.0, c};
        m.eval_face(ie, ts, xi, pe, fe);
        const auto v = m.motion.velocity({x0[0], x0[1]}, t);
        gerr = std::max(gerr, (fe.g - v).norm());
      }
    return err;
  };
  double g24 = 0, g48 = 0;
  const double e24 = error(24, g24);
  const double e48 = error(48, g48);
  CHECK(e24 < 2e-3);
  CHECK(g24 < 2e-2);
  CHECK(e48 < e24 / 4);
}

TEST_CASE("pitch keeps the axis fixed and rotates the foil") {
  const auto mo = pitch_motion(4.0);
  const Eigen::Vector2d xa(1.0 / 3.0, 0.0);
  for (double t : {0.0, 0.7, 1.0, 2.3}) {
    CHECK((mo.apply(xa, t) - xa).norm() < 1e-15);
    CHECK(mo.velocity(xa, t).norm() < 1e-15);
  }
  // Nose up at the quarter period: the leading edge moves up.
  CHECK(mo.apply({0.0, 0.0}, 1.0)[1] > 0);
  CHECK(mo.pitch_angle(1.0) == doctest::Approx(10.0 * kPi / 180.0));
  // Velocity is the time derivative of the position.
  const Eigen::Vector2d x(0.9, 0.05);
  const double h = 1e-6;
  const Eigen::Vector2d fd = (mo.apply(x, 0.4 + h) - mo.apply(x, 0.4 - h)) / (2 * h);
  CHECK((fd - mo.velocity(x, 0.4)).norm() < 1e-8);

  const auto m = build_spacetime_mesh(coarse_foil(), mo, {TemporalKind::OpenC0, 24, 2}, 1.0);
  const int ie = foil_edge(m, "upper_tail");
  const auto x0 = st_point(m, m.edges[ie].sp_elem, 0.0, 0.0, 0.0);
  const int nsp = static_cast<int>(m.sp_elems.size());
  const auto x6 = st_point(m, m.edges[ie].sp_elem + nsp * 6, 0.0, 0.0, 0.0);  // t = T/4
  const auto expect = mo.apply({x0[0], x0[1]}, x6[2]);
  CHECK(std::abs(x6[0] - expect[0]) < 2e-3);
  CHECK(std::abs(x6[1] - expect[1]) < 2e-3);
}

TEST_CASE("boundary velocity and normal velocity agree") {
  const auto m = build_spacetime_mesh(coarse_foil(), heave_motion(6.0), {TemporalKind::OpenC0, 12, 2}, 1.0);
  PointEval pe;
  FaceEval fe;
  int checked = 0;
  for (size_t ie = 0; ie < m.edges.size(); ++ie)
    for (int ts : {0, 5, 11}) {
      const double xi_f[2] = {0.4, 0.8};
      double xi[3];
      m.face_to_local(static_cast<int>(ie), xi_f[0], xi_f[1], xi);
      m.eval_face(static_cast<int>(ie), ts, xi, pe, fe);
      CHECK(std::abs(fe.g.dot(fe.n) - fe.vn) < 1e-10);
      CHECK(fe.nhat.norm() == doctest::Approx(1.0));
      if (m.edges[ie].tag == FaceTag::Interior) {
        const FaceRef f{static_cast<int>(ie), ts, m.edges[ie].sp_elem, FaceTag::Interior};
        CHECK((mesh_boundary_velocity(m, f, xi_f) - fe.g).norm() < 1e-14);
        const auto bn = boundary_normal(m, f, xi_f);
        CHECK(bn.vn == doctest::Approx(fe.vn));
        ++checked;
      }
    }
  CHECK(checked > 0);

  // Outward normal on the foil points into the body, i.e. towards the chord line.
  const int ie = foil_edge(m, "upper_tail");
  const double xi[3] = {0.5, 0.0, 0.0};
  m.eval_face(ie, 0, xi, pe, fe);
  CHECK(fe.n[1] < 0);

  const auto faces = m.faces();
  for (const auto& f : faces) {
    const double xi_f[2] = {0.5, 0.5};
    if (f.tag == FaceTag::Initial || f.tag == FaceTag::Final) {
      CHECK_THROWS_AS(boundary_normal(m, f, xi_f), StructureError);
      break;
    }
  }
  for (const auto& f : faces)
    if (f.tag == FaceTag::Dirichlet) {
      const double xi_f[2] = {0.5, 0.5};
      CHECK_THROWS_AS(mesh_boundary_velocity(m, f, xi_f), StructureError);
      break;
    }
  CHECK_THROWS_AS(split_normal({0.0, 0.0, 1.0}, 1.0), StructureError);
}

TEST_CASE("temporal periodicity and rigid-motion volume") {
  const auto sp = coarse_foil();
  for (auto kind : {TemporalKind::OpenC0, TemporalKind::Periodic}) {
    const auto m = build_spacetime_mesh(sp, heave_motion(4.0), {kind, 12, 2}, 1.0);
    const int nsp = static_cast<int>(m.sp_elems.size());
    const int last = nsp * (m.num_t_spans() - 1);
    for (int k : {0, 17, nsp - 1}) {
      const auto a = st_point(m, k, 0.3, 0.6, 0.0);
      const auto b = st_point(m, k + last, 0.3, 0.6, 1.0);
      CHECK((a.head<2>() - b.head<2>()).norm() < 1e-12);
      CHECK(b[2] - a[2] == doctest::Approx(4.0));
    }
    const double A0 = m.spatial_area(0.0);
    for (double t : {0.5, 1.3, 2.9}) CHECK(m.spatial_area(t) == doctest::Approx(A0).epsilon(1e-10));
    CHECK(m.interior_boundary_length(1.1) == doctest::Approx(m.interior_boundary_length(0.0)).epsilon(1e-10));
  }
  CHECK(build_steady_mesh(sp).interior_boundary_length(0) == doctest::Approx(2.03).epsilon(0.01));
  const auto mo = heave_motion(3.0);
  CHECK(build_spacetime_mesh(sp, mo, {TemporalKind::OpenC0, 12, 2}, 1.0).period == 3.0);
  CHECK_THROWS_AS(build_spacetime_mesh(sp, mo, {TemporalKind::Periodic, 2, 2}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(build_spacetime_mesh(sp, mo, {TemporalKind::OpenC0, 0, 2}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(build_spacetime_mesh(sp, mo, {TemporalKind::OpenC0, 2, 2}, -1.0), std::invalid_argument);
}
