#pragma once

// Discrete space-time weak form: Galerkin, pseudo-time, residual-based
// multiscale stabilization, weak interior-boundary conditions and outflow
// backflow terms, evaluated per element / face with exact Jacobians.

#include <functional>

#include <Eigen/Dense>

#include "stflow/mesh.hpp"
#include "stflow/quadrature.hpp"

namespace stflow {

struct FlowProperties {
  double nu = 1e-3;
  double rho = 1.0;
  double U = 1.0;
  Eigen::Vector2d free_stream = Eigen::Vector2d(1.0, 0.0);  // also the strong inflow value
  double s = 1.0;
  double a = 4.0;  // artificial speed of sound
  // Body force f(xhat); empty means zero.
  std::function<Eigen::Vector2d(const Eigen::Vector3d&)> body_force;

  void validate() const;
};

struct StabConstants {
  double C_I = 36.0;
  double C_Ib = 8.0;
};

// tau_M = (uhat . Ghat uhat + C_I nu^2 G:G)^{-1/2}. Throws DomainError if the
// bracket vanishes.
double tau_M(const Eigen::Vector3d& uhat, const Eigen::Matrix3d& Ghat, const Eigen::Matrix2d& G, double nu,
             double C_I);
double tau_C(double tauM, const Eigen::Matrix2d& G);
double tau_b(double nu, const Eigen::Matrix2d& G, const Eigen::Vector2d& n, double C_Ib);

struct StrongResiduals {
  Eigen::Vector2d r_M;
  double r_C = 0;
};

// grad_u(i, J): derivative of u_i along xhat_J (J = x1, x2, s t).
StrongResiduals strong_residuals(const Eigen::Vector3d& uhat, const Eigen::Matrix<double, 2, 3>& grad_u,
                                 const Eigen::Vector2d& lap_u, const Eigen::Vector2d& grad_p,
                                 const Eigen::Vector2d& f, double nu);

struct KernelOptions {
  bool pseudo_time = false;  // include (w,(u-u_prev)/dtheta) + (q,(p-p_prev)/(a^2 dtheta))
  double dtheta = 5.0;
  bool freeze_tau = false;  // Picard linearization in tau
  // Optional term switches (used by identity checks).
  bool galerkin = true;
  bool stabilization = true;
};

// Local ordering: index 3*a + f, f = 0,1 (velocity), 2 (pressure).
struct ElementContribution {
  int nb = 0;
  Eigen::VectorXd R;
  Eigen::MatrixXd K;  // dR/dU, only filled when requested
};

void element_residual(const SpaceTimeMesh& mesh, int e, const double* U, const double* U_prev,
                      const FlowProperties& props, const StabConstants& stab, const KernelOptions& opts,
                      ElementContribution& out, bool jacobian);

void face_residual_weak_bc(const SpaceTimeMesh& mesh, int edge, int t_span, const double* U,
                           const FlowProperties& props, const StabConstants& stab, ElementContribution& out,
                           bool jacobian);

void face_residual_outflow(const SpaceTimeMesh& mesh, int edge, int t_span, const double* U,
                           const FlowProperties& props, ElementContribution& out, bool jacobian);

// Quadrature used by the kernels: (p+1) points per spatial direction and
// (p_t+1) in time (1 for steady meshes).
const QuadratureRule& element_quadrature(const SpaceTimeMesh& mesh);
const QuadratureRule& face_quadrature(const SpaceTimeMesh& mesh);

}  // namespace stflow
