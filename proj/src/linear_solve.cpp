#include <cmath>
#include <memory>

#include <umfpack.h>
#include <unsupported/Eigen/IterativeSolvers>

#include "stflow/errors.hpp"
#include "stflow/solver.hpp"

namespace stflow {

SparseLU::SparseLU() = default;
SparseLU::~SparseLU() { release(); }

void SparseLU::release() {
  if (numeric_) umfpack_di_free_numeric(&numeric_);
  if (symbolic_) umfpack_di_free_symbolic(&symbolic_);
  numeric_ = symbolic_ = nullptr;
}

void SparseLU::factorize(const SparseMatrixR& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("matrix must be square");
  if (!A.isCompressed()) throw std::invalid_argument("matrix must be compressed");
  release();
  n_ = static_cast<int>(A.rows());
  rowptr_.assign(A.outerIndexPtr(), A.outerIndexPtr() + n_ + 1);
  cols_.assign(A.innerIndexPtr(), A.innerIndexPtr() + A.nonZeros());
  vals_.assign(A.valuePtr(), A.valuePtr() + A.nonZeros());
  // The row-major arrays are the column-major arrays of A^T.
  double control[UMFPACK_CONTROL], info[UMFPACK_INFO];
  umfpack_di_defaults(control);
  int status = umfpack_di_symbolic(n_, n_, rowptr_.data(), cols_.data(), vals_.data(), &symbolic_, control, info);
  if (status != UMFPACK_OK) throw SolverError("sparse LU symbolic analysis failed (status " + std::to_string(status) + ")", 0);
  status = umfpack_di_numeric(rowptr_.data(), cols_.data(), vals_.data(), symbolic_, &numeric_, control, info);
  if (status == UMFPACK_WARNING_singular_matrix) throw SolverError("singular matrix in sparse LU", 0);
  if (status != UMFPACK_OK) throw SolverError("sparse LU factorization failed (status " + std::to_string(status) + ")", 0);
}

void SparseLU::solve(const double* b, double* x) const {
  if (!numeric_) throw SolverError("sparse LU used before factorization", 0);
  double control[UMFPACK_CONTROL], info[UMFPACK_INFO];
  umfpack_di_defaults(control);
  control[UMFPACK_IRSTEP] = 2;
  const int status = umfpack_di_solve(UMFPACK_At, rowptr_.data(), cols_.data(), vals_.data(), x, b, numeric_,
                                      control, info);
  if (status != UMFPACK_OK) throw SolverError("sparse LU solve failed (status " + std::to_string(status) + ")", 0);
}

namespace {

// Block Jacobi or forward block Gauss-Seidel over contiguous index ranges,
// each diagonal block factorized exactly.
class BlockPreconditioner {
 public:
  BlockPreconditioner(const SparseMatrixR& A, const std::vector<int>& starts, BlockPrecond kind)
      : A_(A), starts_(starts), kind_(kind) {
    if (starts_.size() < 2) starts_ = {0, static_cast<int>(A.rows())};
    const int nb = static_cast<int>(starts_.size()) - 1;
    lu_.resize(nb);
    for (int k = 0; k < nb; ++k) {
      const int s = starts_[k], n = starts_[k + 1] - s;
      if (n == 0) continue;
      lu_[k] = std::make_unique<SparseLU>();
      SparseMatrixR blk = A.block(s, s, n, n);
      blk.makeCompressed();
      lu_[k]->factorize(blk);
    }
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& r) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(r.size());
    const int nb = static_cast<int>(starts_.size()) - 1;
    Eigen::VectorXd rhs;
    for (int k = 0; k < nb; ++k) {
      const int s = starts_[k], n = starts_[k + 1] - s;
      if (n == 0) continue;
      rhs = r.segment(s, n);
      if (kind_ == BlockPrecond::GaussSeidel && k > 0) rhs -= A_.middleRows(s, n) * x;
      lu_[k]->solve(rhs.data(), x.data() + s);
    }
    return x;
  }

 private:
  const SparseMatrixR& A_;
  std::vector<int> starts_;
  BlockPrecond kind_;
  std::vector<std::unique_ptr<SparseLU>> lu_;
};

}  // namespace

Eigen::VectorXd linear_solve(const SparseSystem& sys, const LinearSolverConfig& cfg, LinearSolveStats* stats) {
  const auto& A = sys.A;
  if (A.rows() != A.cols() || A.rows() != sys.b.size()) throw std::invalid_argument("system dimensions mismatch");
  const double bnorm = sys.b.norm();
  LinearSolveStats st;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(sys.b.size());
  if (bnorm == 0.0) {
    if (stats) *stats = st;
    return x;
  }
  if (cfg.method == LinearMethod::Direct) {
    SparseMatrixR Ac = A;
    Ac.makeCompressed();
    SparseLU lu;
    lu.factorize(Ac);
    lu.solve(sys.b.data(), x.data());
    st.iterations = 1;
  } else {
    const BlockPreconditioner pre(A, sys.block_starts, cfg.precond);
    // Left-preconditioned restarted GMRES; the true residual is checked after each cycle.
    int used = 0;
    while (true) {
      Eigen::Index iters = cfg.max_iterations - used;
      double tol = cfg.tolerance * 0.1;
      Eigen::internal::gmres(A, sys.b, x, pre, iters, static_cast<Eigen::Index>(cfg.restart), tol);
      used += static_cast<int>(iters);
      const double rel = (sys.b - A * x).norm() / bnorm;
      if (rel <= cfg.tolerance || used >= cfg.max_iterations || iters == 0) break;
    }
    st.iterations = used;
  }
  st.relative_residual = (sys.b - A * x).norm() / bnorm;
  if (stats) *stats = st;
  if (!std::isfinite(st.relative_residual))
    throw SolverError("linear solve breakdown (non-finite residual)", st.iterations);
  if (st.relative_residual > cfg.tolerance)
    throw SolverError("linear solve did not reach relative residual " + std::to_string(cfg.tolerance) +
                          " (got " + std::to_string(st.relative_residual) + ")",
                      st.iterations);
  return x;
}

}  // namespace stflow
