#pragma once

// Conservation diagnostics, auxiliary boundary flux, conservative traction,
// force coefficients, Richardson extrapolation and field export.

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "stflow/mesh.hpp"
#include "stflow/solver.hpp"

namespace stflow {

// Discrete fields at an evaluated point of element e.
struct FieldValues {
  Eigen::Vector2d u = Eigen::Vector2d::Zero();
  double p = 0;
  Eigen::Matrix<double, 2, 3> grad_u = Eigen::Matrix<double, 2, 3>::Zero();  // d u_i / d xhat_J
};
FieldValues field_values(const SpaceTimeMesh& mesh, int e, const PointEval& pe, const Eigen::VectorXd& U);

// ------------------------------------------------------------------ mass

// Testing with W = {0, 1}: the divergence integral is balanced by the
// pressure test of the weak boundary condition on P_int.
struct MassReport {
  double divergence = 0;    // int_Q div u dx
  double weak_bc_flux = 0;  // int_{P_int} n . (u - g) ds
  double balance = 0;       // divergence - weak_bc_flux
  double assembled = 0;     // sum of the assembled mass rows
};
MassReport global_mass_report(const Problem& pb, const DofMap& dofs, const Eigen::VectorXd& U);

// ----------------------------------------------------------- momentum

struct AuxiliaryFlux {
  std::vector<int> nodes;  // nodes of the P_ext_D trace basis
  Eigen::MatrixXd lambda;  // nodes x 2 coefficients
  Eigen::Vector2d total = Eigen::Vector2d::Zero();  // int_{P_ext_D} lambda_i ds
};
AuxiliaryFlux auxiliary_flux(const Problem& pb, const DofMap& dofs, const Eigen::VectorXd& U);

// Terms of the linear-momentum identity obtained with W = {e_i, 0}.
struct MomentumBalance {
  Eigen::Vector2d flux = Eigen::Vector2d::Zero();                // int lambda_i over P_ext_D
  Eigen::Vector2d convection = Eigen::Vector2d::Zero();          // int_Q uhat . gradhat u_i
  Eigen::Vector2d traction_gradient = Eigen::Vector2d::Zero();   // int_{P_int} p n_i - nu u_{i,j} n_j
  Eigen::Vector2d traction_symmetric = Eigen::Vector2d::Zero();  // int_{P_int} p n_i - nu (u_{i,j} + u_{j,i}) n_j
  Eigen::Vector2d penalty = Eigen::Vector2d::Zero();             // int_{P_int} tau_b (u_i - g_i)
  Eigen::Vector2d backflow = Eigen::Vector2d::Zero();            // -int_{P_ext_N} u_n^- u_i
  Eigen::Vector2d body_force = Eigen::Vector2d::Zero();          // -int_Q f_i
  Eigen::Vector2d free_residual = Eigen::Vector2d::Zero();       // sum of the free momentum rows

  // Right-hand side with the terms the discrete form produces.
  Eigen::Vector2d rhs() const;
  // Right-hand side as printed: symmetric viscous flux and no convection.
  Eigen::Vector2d rhs_printed() const;
  double imbalance() const;          // max_i |flux_i - rhs_i|
  double imbalance_printed() const;  // max_i |flux_i - rhs_printed_i|
};
MomentumBalance momentum_balance(const Problem& pb, const DofMap& dofs, const Eigen::VectorXd& U);

// ------------------------------------------------------------ traction

// psi_i over the temporal basis; force(t) = perimeter * psi(t).
struct TractionSeries {
  TemporalBasis basis;
  double period = 1.0;
  double perimeter = 0.0;
  Eigen::MatrixXd psi;           // leaders x 2, symmetric viscous flux
  Eigen::MatrixXd psi_gradient;  // leaders x 2, gradient viscous flux
  Eigen::MatrixXd rhs;           // leaders x 2, tested right-hand side (symmetric form)
  double solve_residual = 0;     // relative residual of the mass-matrix solves

  Eigen::Vector2d force(double t, bool gradient_form = false) const;
};
TractionSeries conservative_traction(const Problem& pb, const Eigen::VectorXd& U);

struct ForceCoefficients {
  double Cd = 0;
  double Cl = 0;
};
// Drag along the flow direction, lift along its counter-clockwise normal.
ForceCoefficients force_coefficients(const Eigen::Vector2d& F, double rho, double chord, double U,
                                     const Eigen::Vector2d& flow_direction);

struct CoefficientScale {
  double rho = 1.0;
  double chord = 1.0;
  double U = 1.0;
  Eigen::Vector2d flow_direction = Eigen::Vector2d(1.0, 0.0);
};

// `t_over_T,Cd,Cl` at n_samples uniform phases k / n_samples.
void write_force_csv(const TractionSeries& series, int n_samples, const CoefficientScale& scale, std::ostream& os);

// ------------------------------------------------------------ analysis

struct RichardsonResult {
  double order = 0;
  double extrapolated = 0;
  double ratio = 0;  // refinement ratio h_1 / h_2
  double constant = 0;  // C in v = v0 + C h^q
  std::array<double, 3> errors{};  // v_i - v0
};
// Samples (h_i, v_i) with a constant refinement ratio; any order of input.
// Throws ConvergenceError for equal consecutive values or oscillatory data.
RichardsonResult richardson_extrapolate(const std::array<double, 3>& h, const std::array<double, 3>& v);

// alpha - atan(2 pi h_a cos(2 pi t / T) / (T U)), in degrees.
double effective_aoa(double alpha_deg, double heave_amplitude, double T, double U, double t);

// ------------------------------------------------------------ export

struct SliceField {
  double t = 0;
  std::vector<Eigen::Vector2d> x;
  std::vector<Eigen::Vector2d> u;
  std::vector<double> p;
  std::vector<std::array<int, 4>> quads;
};
// Spatial slice at time t sampled on a (lattice + 1)^2 grid per element.
SliceField sample_slice(const SpaceTimeMesh& mesh, const Eigen::VectorXd& U, double t, int lattice = 4);
void write_vtk(const SliceField& slice, std::ostream& os);
// One legacy VTK file per time; returns the written paths.
std::vector<std::filesystem::path> export_fields(const SpaceTimeMesh& mesh, const Eigen::VectorXd& U,
                                                 const std::vector<double>& times,
                                                 const std::filesystem::path& directory, int lattice = 4);

// ------------------------------------------------------------ summary

nlohmann::json to_json(const MassReport& m);
nlohmann::json to_json(const MomentumBalance& b);
nlohmann::json to_json(const RichardsonResult& r);

}  // namespace stflow
