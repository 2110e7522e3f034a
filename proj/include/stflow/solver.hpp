#pragma once

// Global assembly with periodic and strong Dirichlet constraints, sparse
// linear solves, and the pseudo-transient Newton march.

#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "stflow/formulation.hpp"
#include "stflow/mesh.hpp"

namespace stflow {

using SparseMatrixR = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

// Global dof index: 3 * node + field, node = leader_level * num_cps + cp.
struct DofMap {
  int num_nodes = 0;
  int num_cps = 0;
  int num_followers = 0;             // follower control points folded into leaders
  std::vector<char> strong;          // per dof
  std::vector<double> prescribed;    // per dof, strong values
  std::vector<int> free_index;       // per dof, -1 when strong
  std::vector<int> free_dofs;        // free index -> dof
  std::vector<int> block_starts;     // free-index start of each leader level, plus end

  int num_dofs() const { return 3 * num_nodes; }
  int num_free() const { return static_cast<int>(free_dofs.size()); }
  int num_strong() const { return num_dofs() - num_free(); }
};

using BoundaryFunction = std::function<Eigen::Vector2d(const Eigen::Vector3d&)>;

// Velocity dofs on Dirichlet exterior faces become strong with values from the
// L2 projection of g_ext onto the boundary trace space.
DofMap build_dof_map(const SpaceTimeMesh& mesh, const BoundaryFunction& g_ext);
DofMap build_dof_map(const SpaceTimeMesh& mesh, const Eigen::Vector2d& g_ext);

struct Problem {
  const SpaceTimeMesh* mesh = nullptr;
  FlowProperties props;
  StabConstants stab;
};

// Free-dof CSR pattern derived from element connectivity.
class SparsePattern {
 public:
  SparsePattern(const SpaceTimeMesh& mesh, const DofMap& dofs);

  int rows() const { return n_; }
  long long nonzeros() const { return static_cast<long long>(cols_.size()); }
  // Fresh matrix with this pattern and zero values.
  SparseMatrixR make_matrix() const;
  // Position of (row dof, column dof) in the value array, -1 if either is strong.
  long long position(int node_r, int field_r, int node_c, int field_c) const;

  // Value-array layout of the 3x3 coupling block between two nodes.
  struct Block {
    long long start = 0;
    int row_len = 0;
    const std::array<int, 3>* fr = nullptr;  // free-field ranks of the row node
    const std::array<int, 3>* fc = nullptr;
    long long pos(int f, int g) const { return start + static_cast<long long>((*fr)[f]) * row_len + (*fc)[g]; }
  };
  Block block(int node_r, int node_c) const;

 private:
  const DofMap* dofs_;
  int n_ = 0;
  std::vector<int> rowptr_, cols_;
  std::vector<int> nbr_ptr_, nbr_, nbr_off_;
  std::vector<int> node_row_;            // row length of each node (same for all its fields)
  std::vector<std::array<int, 3>> fidx_;  // free-field rank within a node, -1 if strong
};

struct AssemblyOptions {
  KernelOptions kernel;
  bool jacobian = true;
};

// Full residual over all dofs and (optionally) the free-free Jacobian.
// `pattern` may be null when no Jacobian is requested.
void assemble(const Problem& pb, const DofMap& dofs, const SparsePattern* pattern, const Eigen::VectorXd& U,
              const Eigen::VectorXd& U_prev, const AssemblyOptions& opts, Eigen::VectorXd& R_full,
              SparseMatrixR* K);

Eigen::VectorXd restrict_free(const DofMap& dofs, const Eigen::VectorXd& full);

// Uniform free stream, zero pressure, strong values applied.
Eigen::VectorXd initial_state(const DofMap& dofs, const Eigen::Vector2d& free_stream);

// ------------------------------------------------------------ linear solve

enum class LinearMethod { Direct, Gmres };
enum class BlockPrecond { Jacobi, GaussSeidel };

struct LinearSolverConfig {
  LinearMethod method = LinearMethod::Direct;
  BlockPrecond precond = BlockPrecond::GaussSeidel;
  double tolerance = 1e-8;
  int max_iterations = 400;
  int restart = 60;
};

struct SparseSystem {
  SparseMatrixR A;
  Eigen::VectorXd b;
  std::vector<int> block_starts;  // optional block partition for the preconditioner
};

struct LinearSolveStats {
  int iterations = 0;
  double relative_residual = 0;
};

// Sparse LU (UMFPACK) of a row-major matrix.
class SparseLU {
 public:
  SparseLU();
  ~SparseLU();
  SparseLU(const SparseLU&) = delete;
  SparseLU& operator=(const SparseLU&) = delete;
  void factorize(const SparseMatrixR& A);
  void solve(const double* b, double* x) const;
  int rows() const { return n_; }

 private:
  void release();
  int n_ = 0;
  std::vector<int> rowptr_, cols_;
  std::vector<double> vals_;
  void* symbolic_ = nullptr;
  void* numeric_ = nullptr;
};

// Throws SolverError if the relative residual exceeds the tolerance.
Eigen::VectorXd linear_solve(const SparseSystem& sys, const LinearSolverConfig& cfg,
                             LinearSolveStats* stats = nullptr);

// ----------------------------------------------------------- march

struct SolverConfig {
  double dtheta = 5.0;
  int max_steps = 14;
  int newton_iterations = 5;
  double tolerance = 1e-6;
  bool early_exit = false;  // stop Newton once the step residual dropped by 100x (or below tolerance / 100)
  LinearSolverConfig linear;
  bool freeze_tau = true;  // Picard in tau; the exact linearization diverges from the free stream at dtheta = 5
  // Backtracking: halve the update until the pseudo-time residual decreases;
  // the last halving is taken unconditionally. 0 disables the line search.
  int max_halvings = 4;
  // Step rejection: a step whose end residual exceeds growth_limit times the
  // last accepted residual (or whose linear solve fails) is undone and retried
  // with dtheta / 4; accepted steps double the step back up to dtheta.
  // 0 disables rejection.
  double growth_limit = 0;
  double min_dtheta_ratio = 1.0 / 1024;

  void validate() const;
};

struct ResidualNorms {
  double mom_x = 0, mom_y = 0, mass = 0;
  double total() const;
};

struct HistoryEntry {
  double theta = 0;
  ResidualNorms norms;
};

struct NewtonLogEntry {
  int step = 0;
  int iteration = 0;
  double residual = 0;  // pseudo-time residual before the update
  int linear_iterations = 0;
  double step_length = 1.0;  // backtracking factor applied to the Newton update
};

struct ConvergenceReport {
  bool converged = false;
  int steps = 0;  // pseudo-time steps taken
  int newton_iterations = 0;
  int rejected_steps = 0;
  std::vector<HistoryEntry> history;
  std::vector<NewtonLogEntry> newton_log;
  ResidualNorms final_norms;
  std::string message;
};

ResidualNorms residual_norms(const DofMap& dofs, const Eigen::VectorXd& R_full);

using ProgressFn = std::function<void(const std::string&)>;

// State U is updated in place (full dof vector with strong values applied).
ConvergenceReport pseudo_transient_march(const Problem& pb, const DofMap& dofs, Eigen::VectorXd& U,
                                         const SolverConfig& cfg, const ProgressFn& progress = {});

void write_residual_csv(const ConvergenceReport& report, std::ostream& os);

// Assembled steady residual (no pseudo-time term) of a state.
Eigen::VectorXd global_residual(const Problem& pb, const DofMap& dofs, const Eigen::VectorXd& U);

}  // namespace stflow
