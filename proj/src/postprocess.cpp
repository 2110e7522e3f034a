#include "stflow/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include <Eigen/Sparse>

#include "stflow/errors.hpp"
#include "stflow/formulation.hpp"
#include "stflow/quadrature.hpp"

namespace stflow {

FieldValues field_values(const SpaceTimeMesh& mesh, int e, const PointEval& pe, const Eigen::VectorXd& U) {
  int nodes[kMaxLocal];
  mesh.local_nodes(e, nodes);
  FieldValues f;
  for (int a = 0; a < pe.nb; ++a) {
    const double* c = U.data() + 3 * nodes[a];
    for (int i = 0; i < 2; ++i) {
      f.u[i] += pe.N[a] * c[i];
      for (int J = 0; J < 3; ++J) f.grad_u(i, J) += pe.dN[a][J] * c[i];
    }
    f.p += pe.N[a] * c[2];
  }
  return f;
}

namespace {

// Calls fn(e, pe, w) at every volume quadrature point.
template <class Fn>
void for_volume_points(const SpaceTimeMesh& mesh, Fn&& fn) {
  const QuadratureRule& q = element_quadrature(mesh);
  PointEval pe;
  for (int e = 0; e < mesh.num_elements(); ++e)
    for (int iq = 0; iq < q.size(); ++iq) {
      const double* p = q.point(iq);
      const double xi[3] = {p[0], p[1], q.dim > 2 ? p[2] : 0.5};
      mesh.eval_point(e, xi, pe, false);
      fn(e, pe, q.weights[iq] * std::abs(pe.detJ));
    }
}

// Calls fn(e, ts, xi, pe, fe, w) at every face quadrature point of edges with the tag.
template <class Fn>
void for_face_points(const SpaceTimeMesh& mesh, FaceTag tag, Fn&& fn) {
  const QuadratureRule& q = face_quadrature(mesh);
  PointEval pe;
  FaceEval fe;
  const int nspe = static_cast<int>(mesh.sp_elems.size());
  for (int ts = 0; ts < mesh.num_t_spans(); ++ts)
    for (size_t ie = 0; ie < mesh.edges.size(); ++ie) {
      if (mesh.edges[ie].tag != tag) continue;
      const int e = mesh.edges[ie].sp_elem + nspe * ts;
      for (int iq = 0; iq < q.size(); ++iq) {
        double xi[3];
        mesh.face_to_local(static_cast<int>(ie), q.point(iq)[0], q.dim > 1 ? q.point(iq)[1] : 0.5, xi);
        mesh.eval_face(static_cast<int>(ie), ts, xi, pe, fe);
        fn(e, ts, xi, pe, fe, q.weights[iq] * fe.dsigma);
      }
    }
}

Eigen::VectorXd full_residual(const Problem& pb, const DofMap& dofs, const Eigen::VectorXd& U) {
  if (!pb.mesh) throw std::invalid_argument("problem has no mesh");
  if (U.size() != dofs.num_dofs()) throw std::invalid_argument("state size does not match the dof map");
  return global_residual(pb, dofs, U);
}

}  // namespace

// ------------------------------------------------------------------ mass

MassReport global_mass_report(const Problem& pb, const DofMap& dofs, const Eigen::VectorXd& U) {
  const SpaceTimeMesh& mesh = *pb.mesh;
  MassReport r;
  for_volume_points(mesh, [&](int e, const PointEval& pe, double w) {
    const FieldValues f = field_values(mesh, e, pe, U);
    r.divergence += w * (f.grad_u(0, 0) + f.grad_u(1, 1));
  });
  for_face_points(mesh, FaceTag::Interior,
                  [&](int e, int, const double*, const PointEval& pe, const FaceEval& fe, double w) {
                    const FieldValues f = field_values(mesh, e, pe, U);
                    r.weak_bc_flux += w * fe.n.dot(f.u - fe.g);
                  });
  r.balance = r.divergence - r.weak_bc_flux;
  const Eigen::VectorXd R = full_residual(pb, dofs, U);
  for (int n = 0; n < dofs.num_nodes; ++n) r.assembled += R[3 * n + 2];
  return r;
}

// ----------------------------------------------------------- momentum

AuxiliaryFlux auxiliary_flux(const Problem& pb, const DofMap& dofs, const Eigen::VectorXd& U) {
  const SpaceTimeMesh& mesh = *pb.mesh;
  const Eigen::VectorXd R = full_residual(pb, dofs, U);
  AuxiliaryFlux out;
  std::vector<int> idx(dofs.num_nodes, -1);
  for (int n = 0; n < dofs.num_nodes; ++n)
    if (dofs.strong[3 * n]) {
      idx[n] = static_cast<int>(out.nodes.size());
      out.nodes.push_back(n);
    }
  const int ns = static_cast<int>(out.nodes.size());
  out.lambda = Eigen::MatrixXd::Zero(ns, 2);
  if (ns == 0) return out;

  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd integral = Eigen::VectorXd::Zero(ns);
  int nodes[kMaxLocal];
  for_face_points(mesh, FaceTag::Dirichlet,
                  [&](int e, int, const double*, const PointEval& pe, const FaceEval&, double w) {
                    mesh.local_nodes(e, nodes);
                    for (int a = 0; a < pe.nb; ++a) {
                      const int ia = idx[nodes[a]];
                      if (ia < 0 || pe.N[a] == 0.0) continue;
                      integral[ia] += w * pe.N[a];
                      for (int b = 0; b < pe.nb; ++b) {
                        const int ib = idx[nodes[b]];
                        if (ib >= 0 && pe.N[b] != 0.0) trip.emplace_back(ia, ib, w * pe.N[a] * pe.N[b]);
                      }
                    }
                  });
  Eigen::SparseMatrix<double> M(ns, ns);
  M.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(M);
  if (ldlt.info() != Eigen::Success) throw StructureError("singular boundary mass matrix on P_ext_D");
  Eigen::MatrixXd rhs(ns, 2);
  for (int k = 0; k < ns; ++k) {
    rhs(k, 0) = R[3 * out.nodes[k]];
    rhs(k, 1) = R[3 * out.nodes[k] + 1];
  }
  out.lambda = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success || !out.lambda.allFinite())
    throw StructureError("boundary mass matrix solve failed on P_ext_D");
  out.total = (integral.transpose() * out.lambda).transpose();
  return out;
}

Eigen::Vector2d MomentumBalance::rhs() const {
  return convection + traction_gradient + penalty + backflow + body_force;
}
Eigen::Vector2d MomentumBalance::rhs_printed() const {
  return traction_symmetric + penalty + backflow + body_force;
}
double MomentumBalance::imbalance() const { return (flux - rhs()).lpNorm<Eigen::Infinity>(); }
double MomentumBalance::imbalance_printed() const { return (flux - rhs_printed()).lpNorm<Eigen::Infinity>(); }

MomentumBalance momentum_balance(const Problem& pb, const DofMap& dofs, const Eigen::VectorXd& U) {
  const SpaceTimeMesh& mesh = *pb.mesh;
  const double nu = pb.props.nu, s = mesh.s;
  MomentumBalance b;
  b.flux = auxiliary_flux(pb, dofs, U).total;
  for_volume_points(mesh, [&](int e, const PointEval& pe, double w) {
    const FieldValues f = field_values(mesh, e, pe, U);
    const Eigen::Vector3d uhat(f.u[0], f.u[1], s);
    b.convection += w * (f.grad_u * uhat);
    if (pb.props.body_force) b.body_force -= w * pb.props.body_force(pe.xhat);
  });
  for_face_points(mesh, FaceTag::Interior,
                  [&](int e, int, const double*, const PointEval& pe, const FaceEval& fe, double w) {
                    const FieldValues f = field_values(mesh, e, pe, U);
                    const Eigen::Matrix2d gu = f.grad_u.leftCols<2>();
                    const Eigen::Vector2d& n = fe.n;
                    b.traction_gradient += w * (f.p * n - nu * gu * n);
                    b.traction_symmetric += w * (f.p * n - nu * (gu + gu.transpose()) * n);
                    b.penalty += w * tau_b(nu, pe.G, n, pb.stab.C_Ib) * (f.u - fe.g);
                  });
  for_face_points(mesh, FaceTag::Neumann,
                  [&](int e, int, const double*, const PointEval& pe, const FaceEval& fe, double w) {
                    const FieldValues f = field_values(mesh, e, pe, U);
                    const double un = f.u.dot(fe.n);
                    if (un < 0) b.backflow -= w * un * f.u;
                  });
  const Eigen::VectorXd R = full_residual(pb, dofs, U);
  for (int dof : dofs.free_dofs)
    if (dof % 3 < 2) b.free_residual[dof % 3] += R[dof];
  return b;
}

// ------------------------------------------------------------ traction

Eigen::Vector2d TractionSeries::force(double t, bool gradient_form) const {
  const Eigen::MatrixXd& c = gradient_form ? psi_gradient : psi;
  if (basis.kind == TemporalKind::Steady) return perimeter * c.row(0).transpose();
  double z = t / period;
  if (z < 0.0 || z > 1.0) z -= std::floor(z);
  const int ts = std::min(static_cast<int>(z * basis.n_el), basis.n_el - 1);
  double N[nurbs::kMaxDegree + 1], dN[nurbs::kMaxDegree + 1];
  basis.eval(ts, z, N, dN);
  Eigen::Vector2d v = Eigen::Vector2d::Zero();
  for (int j = 0; j < basis.num_local(); ++j) v += N[j] * c.row(basis.leader(basis.level(ts, j))).transpose();
  return perimeter * v;
}

TractionSeries conservative_traction(const Problem& pb, const Eigen::VectorXd& U) {
  const SpaceTimeMesh& mesh = *pb.mesh;
  const double nu = pb.props.nu;
  TractionSeries out;
  out.basis = mesh.time;
  out.period = mesh.period;
  const int nl = mesh.steady() ? 1 : mesh.time.num_leaders();
  const int nt = mesh.time.num_local();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nl, nl);
  Eigen::MatrixXd b_sym = Eigen::MatrixXd::Zero(nl, 2), b_grad = Eigen::MatrixXd::Zero(nl, 2);
  for_face_points(mesh, FaceTag::Interior,
                  [&](int e, int ts, const double* xi, const PointEval& pe, const FaceEval& fe, double w) {
                    double Nt[nurbs::kMaxDegree + 1], dNt[nurbs::kMaxDegree + 1];
                    int lead[nurbs::kMaxDegree + 1];
                    const double tb = mesh.time.span_begin(ts), te = mesh.time.span_end(ts);
                    mesh.time.eval(ts, tb + xi[2] * (te - tb), Nt, dNt);
                    for (int j = 0; j < nt; ++j) lead[j] = mesh.steady() ? 0 : mesh.time.leader(mesh.time.level(ts, j));
                    const FieldValues f = field_values(mesh, e, pe, U);
                    const Eigen::Matrix2d gu = f.grad_u.leftCols<2>();
                    const Eigen::Vector2d& n = fe.n;
                    const Eigen::Vector2d pen = tau_b(nu, pe.G, n, pb.stab.C_Ib) * (f.u - fe.g);
                    const Eigen::Vector2d ts_sym = f.p * n - nu * (gu + gu.transpose()) * n + pen;
                    const Eigen::Vector2d ts_grad = f.p * n - nu * gu * n + pen;
                    for (int a = 0; a < nt; ++a) {
                      b_sym.row(lead[a]) += w * Nt[a] * ts_sym.transpose();
                      b_grad.row(lead[a]) += w * Nt[a] * ts_grad.transpose();
                      for (int c = 0; c < nt; ++c) M(lead[a], lead[c]) += w * Nt[a] * Nt[c];
                    }
                  });
  // Mean length of P_int, measured with the same face quadrature.
  out.perimeter = M.sum() / (mesh.s * mesh.period);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
  if (ldlt.info() != Eigen::Success || !(ldlt.isPositive()) || M.diagonal().minCoeff() <= 0)
    throw StructureError("singular temporal mass matrix on P_int");
  out.psi = ldlt.solve(b_sym);
  out.psi_gradient = ldlt.solve(b_grad);
  out.rhs = b_sym;
  const double r1 = (M * out.psi - b_sym).norm() / std::max(b_sym.norm(), 1e-300);
  const double r2 = (M * out.psi_gradient - b_grad).norm() / std::max(b_grad.norm(), 1e-300);
  out.solve_residual = std::max(r1, r2);
  return out;
}

ForceCoefficients force_coefficients(const Eigen::Vector2d& F, double rho, double chord, double U,
                                     const Eigen::Vector2d& flow_direction) {
  if (!(U > 0)) throw std::invalid_argument("reference speed must be positive");
  if (!(rho > 0) || !(chord > 0)) throw std::invalid_argument("density and chord must be positive");
  const double len = flow_direction.norm();
  if (!(len > 0)) throw std::invalid_argument("flow direction must be non-zero");
  const Eigen::Vector2d ed = flow_direction / len;
  const Eigen::Vector2d el(-ed[1], ed[0]);
  const double q = 0.5 * rho * chord * U * U;
  return {F.dot(ed) / q, F.dot(el) / q};
}

void write_force_csv(const TractionSeries& series, int n_samples, const CoefficientScale& scale, std::ostream& os) {
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  os << "t_over_T,Cd,Cl\n" << std::setprecision(12);
  for (int k = 0; k < n_samples; ++k) {
    const double phase = static_cast<double>(k) / n_samples;
    const auto c = force_coefficients(series.force(phase * series.period), scale.rho, scale.chord, scale.U,
                                      scale.flow_direction);
    os << phase << "," << c.Cd << "," << c.Cl << "\n";
  }
}

// ------------------------------------------------------------ analysis

RichardsonResult richardson_extrapolate(const std::array<double, 3>& h_in, const std::array<double, 3>& v_in) {
  std::array<int, 3> ord = {0, 1, 2};
  std::sort(ord.begin(), ord.end(), [&](int a, int b) { return h_in[a] > h_in[b]; });
  const double h1 = h_in[ord[0]], h2 = h_in[ord[1]], h3 = h_in[ord[2]];
  const double v1 = v_in[ord[0]], v2 = v_in[ord[1]], v3 = v_in[ord[2]];
  if (!(h3 > 0)) throw std::invalid_argument("mesh sizes must be positive");
  const double r = h1 / h2;
  if (!(r > 1) || std::abs(h2 / h3 - r) > 1e-9 * r)
    throw std::invalid_argument("Richardson extrapolation needs a constant refinement ratio > 1");
  const double d1 = v1 - v2, d2 = v2 - v3;
  if (d1 == 0.0 || d2 == 0.0) throw ConvergenceError("equal consecutive samples: order of convergence undefined");
  const double ratio = d1 / d2;
  if (ratio < 0) throw ConvergenceError("oscillatory convergence: sample differences change sign");
  if (ratio <= 1) throw ConvergenceError("samples do not converge under refinement");
  RichardsonResult res;
  res.ratio = r;
  res.order = std::log(ratio) / std::log(r);
  res.extrapolated = v3 - d2 / (std::pow(r, res.order) - 1.0);
  res.constant = (v3 - res.extrapolated) / std::pow(h3, res.order);
  for (int k = 0; k < 3; ++k) res.errors[ord[k]] = v_in[ord[k]] - res.extrapolated;
  return res;
}

double effective_aoa(double alpha_deg, double heave_amplitude, double T, double U, double t) {
  if (!(T > 0) || !(U > 0)) throw std::invalid_argument("period and speed must be positive");
  const double w = 2 * std::numbers::pi / T;
  return alpha_deg - std::atan(w * heave_amplitude * std::cos(w * t) / U) * 180.0 / std::numbers::pi;
}

// ------------------------------------------------------------ export

SliceField sample_slice(const SpaceTimeMesh& mesh, const Eigen::VectorXd& U, double t, int lattice) {
  if (lattice < 1) throw std::invalid_argument("lattice must be >= 1");
  if (U.size() != 3 * mesh.num_nodes()) throw std::invalid_argument("state size does not match the mesh");
  double tt = t;
  if (!mesh.steady() && (tt < 0 || tt > mesh.period)) tt -= mesh.period * std::floor(tt / mesh.period);
  const auto [ts, loc] = mesh.locate_time(tt);
  SliceField out;
  out.t = t;
  const int m = lattice + 1;
  const int nspe = static_cast<int>(mesh.sp_elems.size());
  PointEval pe;
  for (int k = 0; k < nspe; ++k) {
    const int e = k + nspe * ts;
    const int base = static_cast<int>(out.x.size());
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) {
        const double xi[3] = {static_cast<double>(i) / lattice, static_cast<double>(j) / lattice,
                              mesh.steady() ? 0.5 : loc};
        mesh.eval_point(e, xi, pe, false);
        const FieldValues f = field_values(mesh, e, pe, U);
        out.x.emplace_back(pe.xhat[0], pe.xhat[1]);
        out.u.push_back(f.u);
        out.p.push_back(f.p);
      }
    for (int j = 0; j < lattice; ++j)
      for (int i = 0; i < lattice; ++i) {
        const int a = base + j * m + i;
        out.quads.push_back({a, a + 1, a + m + 1, a + m});
      }
  }
  return out;
}

void write_vtk(const SliceField& s, std::ostream& os) {
  os << "# vtk DataFile Version 3.0\n";
  os << "space-time slice t=" << std::setprecision(17) << s.t << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << s.x.size() << " double\n";
  for (const auto& x : s.x) os << x[0] << " " << x[1] << " 0\n";
  os << "CELLS " << s.quads.size() << " " << 5 * s.quads.size() << "\n";
  for (const auto& q : s.quads) os << "4 " << q[0] << " " << q[1] << " " << q[2] << " " << q[3] << "\n";
  os << "CELL_TYPES " << s.quads.size() << "\n";
  for (size_t k = 0; k < s.quads.size(); ++k) os << "9\n";
  os << "POINT_DATA " << s.x.size() << "\nVECTORS velocity double\n";
  for (const auto& u : s.u) os << u[0] << " " << u[1] << " 0\n";
  os << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
  for (double p : s.p) os << p << "\n";
}

std::vector<std::filesystem::path> export_fields(const SpaceTimeMesh& mesh, const Eigen::VectorXd& U,
                                                 const std::vector<double>& times,
                                                 const std::filesystem::path& directory, int lattice) {
  std::filesystem::create_directories(directory);
  std::vector<std::filesystem::path> out;
  for (size_t k = 0; k < times.size(); ++k) {
    std::ostringstream name;
    name << "slice_" << std::setw(3) << std::setfill('0') << k << ".vtk";
    const auto path = directory / name.str();
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    write_vtk(sample_slice(mesh, U, times[k], lattice), f);
    if (!f) throw std::runtime_error("write failed for " + path.string());
    out.push_back(path);
  }
  return out;
}

// ------------------------------------------------------------ summary

nlohmann::json to_json(const MassReport& m) {
  return {{"divergence_integral", m.divergence},
          {"weak_bc_flux", m.weak_bc_flux},
          {"balance", m.balance},
          {"assembled_mass_rows", m.assembled}};
}

nlohmann::json to_json(const MomentumBalance& b) {
  auto v = [](const Eigen::Vector2d& x) { return nlohmann::json::array({x[0], x[1]}); };
  return {{"auxiliary_flux", v(b.flux)},
          {"convection", v(b.convection)},
          {"traction_gradient", v(b.traction_gradient)},
          {"traction_symmetric", v(b.traction_symmetric)},
          {"penalty", v(b.penalty)},
          {"backflow", v(b.backflow)},
          {"body_force", v(b.body_force)},
          {"free_residual", v(b.free_residual)},
          {"imbalance", b.imbalance()},
          {"imbalance_printed_form", b.imbalance_printed()}};
}

nlohmann::json to_json(const RichardsonResult& r) {
  return {{"order", r.order},
          {"extrapolated", r.extrapolated},
          {"ratio", r.ratio},
          {"errors", nlohmann::json::array({r.errors[0], r.errors[1], r.errors[2]})}};
}

}  // namespace stflow
