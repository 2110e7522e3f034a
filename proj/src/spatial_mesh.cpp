#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

#include "stflow/errors.hpp"
#include "stflow/mesh.hpp"

namespace stflow {

using nurbs::KnotVector;
using nurbs::NurbsPatch;

NacaSection parse_naca(const std::string& code) {
  std::string c = code;
  if (c.size() > 4 && (c.rfind("NACA", 0) == 0 || c.rfind("naca", 0) == 0)) c = c.substr(4);
  if (c.size() != 4 || !std::all_of(c.begin(), c.end(), [](unsigned char ch) { return std::isdigit(ch); }))
    throw ParseError("invalid NACA 4-digit code '" + code + "'");
  if (c[0] != '0' || c[1] != '0')
    throw ParseError("NACA code '" + code + "': only symmetric sections (00xx) are supported");
  const int tt = std::stoi(c.substr(2));
  if (tt == 0) throw ParseError("NACA code '" + code + "' has zero thickness");
  return NacaSection{tt / 100.0};
}

double naca_half_thickness(const NacaSection& s, double chord, double x) {
  const double xc = std::clamp(x / chord, 0.0, 1.0);
  // Closed trailing edge variant of the last coefficient.
  const double poly = 0.2969 * std::sqrt(xc) - 0.1260 * xc - 0.3516 * xc * xc +
                      0.2843 * xc * xc * xc - 0.1036 * xc * xc * xc * xc;
  return 5.0 * s.thickness * chord * poly;
}

namespace {

double exp_map(double x, double beta) {
  if (beta == 0.0) return x;
  return std::expm1(beta * x) / std::expm1(beta);
}

template <class F>
Eigen::MatrixXd curve_ctrl(const KnotVector& kv, F&& f) {
  const auto g = kv.greville();
  Eigen::MatrixXd samples(g.size(), 2);
  for (size_t i = 0; i < g.size(); ++i) samples.row(i) = f(g[i]).transpose();
  return nurbs::interpolate_on_knots(kv, g, samples);
}

// Ruled patch between two curves on the same u-knots; v is the radial direction.
NurbsPatch ruled(const KnotVector& ku, const KnotVector& kv, const Eigen::MatrixXd& inner,
                 const Eigen::MatrixXd& outer, bool mirror) {
  NurbsPatch p;
  p.knots = {ku, kv};
  p.dim_space = 2;
  const auto gv = kv.greville();
  const int nu = ku.num_basis();
  for (size_t j = 0; j < gv.size(); ++j) {
    for (int i = 0; i < nu; ++i) {
      const Eigen::Vector2d x = (1.0 - gv[j]) * inner.row(i).transpose() + gv[j] * outer.row(i).transpose();
      p.coords.push_back(x[0]);
      p.coords.push_back(mirror ? -x[1] : x[1]);
      p.weights.push_back(1.0);
    }
  }
  return p;
}

}  // namespace

SpatialMesh build_spatial_mesh(const SpatialMeshSpec& spec) {
  if (!(spec.chord > 0)) throw std::invalid_argument("chord must be positive");
  if (!(spec.inflow_radius > 0) || !(spec.outflow_distance > 0))
    throw std::invalid_argument("far-field extents must be positive");
  if (spec.n_nose < 1 || spec.n_tail < 1 || spec.n_wake < 1 || spec.n_radial < 1)
    throw std::invalid_argument("element counts must be >= 1");
  if (!(spec.split_fraction > 0 && spec.split_fraction < 1))
    throw std::invalid_argument("split fraction must lie in (0,1)");
  if (spec.degree < 1 || spec.degree > nurbs::kMaxDegree)
    throw std::invalid_argument("spatial degree must be in [1,3]");
  const NacaSection sec = parse_naca(spec.naca);

  auto count = [&](int n) {
    for (int k = 0; k < -spec.level; ++k) n = (n + 1) / 2;
    return std::max(n, 1);
  };
  const int p = spec.degree;
  const int nN = count(spec.n_nose), nT = count(spec.n_tail), nW = count(spec.n_wake),
            nR = count(spec.n_radial);
  const double c = spec.chord;
  const double xs = spec.split_fraction * c;
  const double R = spec.inflow_radius * c;
  const double L = spec.outflow_distance * c;
  const double tan_f = std::tan(spec.flare_deg * std::numbers::pi / 180.0);
  auto top = [&](double x) { return R + (x - xs) * tan_f; };
  auto foil = [&](double x) { return naca_half_thickness(sec, c, x); };

  const KnotVector k_rad = nurbs::mapped_knots(p, nR, [&](double x) { return exp_map(x, spec.radial_stretch); });
  const KnotVector k_nose = nurbs::uniform_knots(p, nN);
  const KnotVector k_tail = nurbs::uniform_knots(p, nT);
  const KnotVector k_wake = nurbs::mapped_knots(p, nW, [&](double x) { return exp_map(x, spec.wake_stretch); });

  using V2 = Eigen::Vector2d;
  // Nose: x = xs u^2 keeps the sqrt-type leading edge smooth in u.
  const auto nose_in = curve_ctrl(k_nose, [&](double u) { return V2(xs * u * u, foil(xs * u * u)); });
  const auto nose_out = curve_ctrl(k_nose, [&](double u) {
    const double th = std::numbers::pi * (1.0 - 0.5 * u);
    return V2(xs + R * std::cos(th), R * std::sin(th));
  });
  const auto tail_in = curve_ctrl(k_tail, [&](double u) {
    const double x = xs + (c - xs) * u;
    return V2(x, foil(x));
  });
  const auto tail_out = curve_ctrl(k_tail, [&](double u) {
    const double x = xs + (c - xs) * u;
    return V2(x, top(x));
  });
  const auto wake_in = curve_ctrl(k_wake, [&](double u) { return V2(c + L * u, 0.0); });
  const auto wake_out = curve_ctrl(k_wake, [&](double u) { return V2(c + L * u, top(c + L * u)); });

  SpatialMesh m;
  m.chord = c;
  m.naca = spec.naca;
  m.degree = p;
  const std::array<SideKind, 4> foil_sides = {SideKind::Interface, SideKind::Interface, SideKind::Interior,
                                              SideKind::Exterior};
  const std::array<SideKind, 4> wake_sides = {SideKind::Interface, SideKind::Exterior, SideKind::Interface,
                                              SideKind::Exterior};
  for (bool lower : {false, true}) {
    const std::string tag = lower ? "lower" : "upper";
    m.patches.push_back(ruled(k_nose, k_rad, nose_in, nose_out, lower));
    m.patch_names.push_back(tag + "_nose");
    m.sides.push_back(foil_sides);
    m.patches.push_back(ruled(k_tail, k_rad, tail_in, tail_out, lower));
    m.patch_names.push_back(tag + "_tail");
    m.sides.push_back(foil_sides);
    m.patches.push_back(ruled(k_wake, k_rad, wake_in, wake_out, lower));
    m.patch_names.push_back(tag + "_wake");
    m.sides.push_back(wake_sides);
  }
  for (int l = 0; l < spec.level; ++l)
    for (auto& patch : m.patches) {
      patch = nurbs::refine_knots(patch, 0, nurbs::bisection_knots(patch.knots[0]));
      patch = nurbs::refine_knots(patch, 1, nurbs::bisection_knots(patch.knots[1]));
    }
  for (const auto& patch : m.patches) patch.validate();
  merge_control_points(m);
  return m;
}

void merge_control_points(SpatialMesh& m, double tol) {
  // Bucket on a grid coarser than tol; neighbouring buckets are searched too.
  const double cell = 1e-8;
  std::map<std::pair<long long, long long>, std::vector<int>> buckets;
  m.cp_xy.clear();
  m.cp_w.clear();
  m.cp_map.assign(m.patches.size(), {});
  for (size_t ip = 0; ip < m.patches.size(); ++ip) {
    const auto& patch = m.patches[ip];
    auto& map = m.cp_map[ip];
    map.resize(patch.num_control_points());
    for (int a = 0; a < patch.num_control_points(); ++a) {
      const double x = patch.coords[2 * a], y = patch.coords[2 * a + 1];
      const long long bx = std::llround(x / cell), by = std::llround(y / cell);
      int found = -1;
      for (long long dx = -1; dx <= 1 && found < 0; ++dx)
        for (long long dy = -1; dy <= 1 && found < 0; ++dy) {
          auto it = buckets.find({bx + dx, by + dy});
          if (it == buckets.end()) continue;
          for (int g : it->second)
            if (std::abs(m.cp_xy[2 * g] - x) <= tol && std::abs(m.cp_xy[2 * g + 1] - y) <= tol) {
              found = g;
              break;
            }
        }
      if (found >= 0) {
        if (std::abs(m.cp_w[found] - patch.weights[a]) > tol)
          throw StructureError("merged control points carry different weights");
      } else {
        found = static_cast<int>(m.cp_w.size());
        m.cp_xy.push_back(x);
        m.cp_xy.push_back(y);
        m.cp_w.push_back(patch.weights[a]);
        buckets[{bx, by}].push_back(found);
      }
      map[a] = found;
    }
  }
}

}  // namespace stflow
