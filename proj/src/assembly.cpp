#include <algorithm>
#include <limits>
#include <stdexcept>

#include <Eigen/SparseCholesky>

#include "stflow/errors.hpp"
#include "stflow/solver.hpp"

namespace stflow {

namespace {

// Local spatial control points (u fastest) lying on a side of the element.
bool on_side(int k, int p, int side) {
  const int a = k % (p + 1), b = k / (p + 1);
  switch (side) {
    case 0: return a == 0;
    case 1: return a == p;
    case 2: return b == 0;
    default: return b == p;
  }
}

}  // namespace

DofMap build_dof_map(const SpaceTimeMesh& mesh, const Eigen::Vector2d& g_ext) {
  return build_dof_map(mesh, [g_ext](const Eigen::Vector3d&) { return g_ext; });
}

DofMap build_dof_map(const SpaceTimeMesh& mesh, const BoundaryFunction& g_ext) {
  DofMap d;
  d.num_cps = mesh.num_cps();
  d.num_nodes = mesh.num_nodes();
  d.num_followers = (mesh.steady() ? 0 : mesh.time.num_levels() - mesh.time.num_leaders()) * d.num_cps;
  const int p = mesh.degree();
  const int nsp = (p + 1) * (p + 1);

  std::vector<char> strong_cp(d.num_cps, 0);
  for (const auto& ed : mesh.edges) {
    if (ed.tag != FaceTag::Dirichlet) continue;
    const auto& el = mesh.sp_elems[ed.sp_elem];
    for (int k = 0; k < nsp; ++k)
      if (on_side(k, p, ed.side)) strong_cp[el.cps[k]] = 1;
  }
  d.strong.assign(d.num_dofs(), 0);
  d.prescribed.assign(d.num_dofs(), 0.0);
  for (int n = 0; n < d.num_nodes; ++n)
    if (strong_cp[n % d.num_cps]) d.strong[3 * n] = d.strong[3 * n + 1] = 1;

  // L2 projection of g_ext on the Dirichlet trace space.
  std::vector<int> sidx(d.num_nodes, -1);
  int ns = 0;
  for (int n = 0; n < d.num_nodes; ++n)
    if (d.strong[3 * n]) sidx[n] = ns++;
  if (ns > 0) {
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(ns, 2);
    const QuadratureRule& q = face_quadrature(mesh);
    PointEval pe;
    FaceEval fe;
    int nodes[kMaxLocal];
    const int nspe = static_cast<int>(mesh.sp_elems.size());
    for (int ts = 0; ts < mesh.num_t_spans(); ++ts)
      for (size_t ie = 0; ie < mesh.edges.size(); ++ie) {
        if (mesh.edges[ie].tag != FaceTag::Dirichlet) continue;
        mesh.local_nodes(mesh.edges[ie].sp_elem + nspe * ts, nodes);
        for (int iq = 0; iq < q.size(); ++iq) {
          double xi[3];
          mesh.face_to_local(static_cast<int>(ie), q.point(iq)[0], q.dim > 1 ? q.point(iq)[1] : 0.5, xi);
          mesh.eval_face(static_cast<int>(ie), ts, xi, pe, fe);
          const double w = q.weights[iq] * fe.dsigma;
          const Eigen::Vector2d g = g_ext(pe.xhat);
          for (int a = 0; a < pe.nb; ++a) {
            const int ia = sidx[nodes[a]];
            if (ia < 0 || pe.N[a] == 0.0) continue;
            rhs.row(ia) += w * pe.N[a] * g.transpose();
            for (int b = 0; b < pe.nb; ++b) {
              const int ib = sidx[nodes[b]];
              if (ib >= 0 && pe.N[b] != 0.0) trip.emplace_back(ia, ib, w * pe.N[a] * pe.N[b]);
            }
          }
        }
      }
    Eigen::SparseMatrix<double> M(ns, ns);
    M.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(M);
    if (ldlt.info() != Eigen::Success) throw StructureError("singular Dirichlet trace mass matrix");
    const Eigen::MatrixXd vals = ldlt.solve(rhs);
    for (int n = 0; n < d.num_nodes; ++n)
      if (sidx[n] >= 0) {
        d.prescribed[3 * n] = vals(sidx[n], 0);
        d.prescribed[3 * n + 1] = vals(sidx[n], 1);
      }
  }

  d.free_index.assign(d.num_dofs(), -1);
  const int nlead = mesh.steady() ? 1 : mesh.time.num_leaders();
  for (int dof = 0; dof < d.num_dofs(); ++dof) {
    const int level = dof / 3 / d.num_cps;
    while (static_cast<int>(d.block_starts.size()) <= level) d.block_starts.push_back(d.num_free());
    if (!d.strong[dof]) {
      d.free_index[dof] = d.num_free();
      d.free_dofs.push_back(dof);
    }
  }
  while (static_cast<int>(d.block_starts.size()) <= nlead) d.block_starts.push_back(d.num_free());
  return d;
}

SparsePattern::SparsePattern(const SpaceTimeMesh& mesh, const DofMap& dofs) : dofs_(&dofs) {
  const int nn = dofs.num_nodes;
  std::vector<std::vector<int>> adj(nn);
  int nodes[kMaxLocal];
  const int nl = mesh.num_local();
  for (int e = 0; e < mesh.num_elements(); ++e) {
    mesh.local_nodes(e, nodes);
    for (int a = 0; a < nl; ++a) {
      auto& row = adj[nodes[a]];
      row.insert(row.end(), nodes, nodes + nl);
      if (row.size() > 4096) {
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
      }
    }
  }
  fidx_.resize(nn);
  std::vector<int> nfree(nn);
  for (int n = 0; n < nn; ++n) {
    int r = 0;
    for (int f = 0; f < 3; ++f) fidx_[n][f] = dofs.strong[3 * n + f] ? -1 : r++;
    nfree[n] = r;
  }
  nbr_ptr_.assign(nn + 1, 0);
  for (int n = 0; n < nn; ++n) {
    auto& row = adj[n];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    nbr_ptr_[n + 1] = nbr_ptr_[n] + static_cast<int>(row.size());
  }
  nbr_.resize(nbr_ptr_[nn]);
  nbr_off_.resize(nbr_ptr_[nn]);
  node_row_.resize(nn);
  n_ = dofs.num_free();
  rowptr_.assign(n_ + 1, 0);
  long long total = 0;
  int r = 0;
  for (int n = 0; n < nn; ++n) {
    int off = 0;
    for (size_t k = 0; k < adj[n].size(); ++k) {
      nbr_[nbr_ptr_[n] + k] = adj[n][k];
      nbr_off_[nbr_ptr_[n] + k] = off;
      off += nfree[adj[n][k]];
    }
    node_row_[n] = off;
    for (int f = 0; f < nfree[n]; ++f) {
      rowptr_[r] = static_cast<int>(total);
      total += off;
      ++r;
    }
    std::vector<int>().swap(adj[n]);
  }
  if (total > std::numeric_limits<int>::max()) throw SolverError("sparsity pattern too large");
  rowptr_[n_] = static_cast<int>(total);
  cols_.resize(total);
  r = 0;
  for (int n = 0; n < nn; ++n)
    for (int f = 0; f < nfree[n]; ++f) {
      int pos = rowptr_[r++];
      for (int k = nbr_ptr_[n]; k < nbr_ptr_[n + 1]; ++k) {
        const int m = nbr_[k];
        for (int g = 0; g < 3; ++g)
          if (fidx_[m][g] >= 0) cols_[pos++] = dofs.free_index[3 * m + g];
      }
    }
}

SparseMatrixR SparsePattern::make_matrix() const {
  SparseMatrixR K(n_, n_);
  K.resizeNonZeros(static_cast<Eigen::Index>(cols_.size()));
  std::copy(rowptr_.begin(), rowptr_.end(), K.outerIndexPtr());
  std::copy(cols_.begin(), cols_.end(), K.innerIndexPtr());
  std::fill(K.valuePtr(), K.valuePtr() + cols_.size(), 0.0);
  return K;
}

SparsePattern::Block SparsePattern::block(int node_r, int node_c) const {
  const int* b = nbr_.data() + nbr_ptr_[node_r];
  const int* e = nbr_.data() + nbr_ptr_[node_r + 1];
  const int* it = std::lower_bound(b, e, node_c);
  if (it == e || *it != node_c) throw StructureError("column outside sparsity pattern");
  Block blk;
  blk.row_len = node_row_[node_r];
  blk.fr = &fidx_[node_r];
  blk.fc = &fidx_[node_c];
  // Every node has a free pressure dof, so the row of its first free field exists.
  const int first = (*blk.fr)[0] >= 0 ? 0 : 2;
  blk.start = static_cast<long long>(rowptr_[dofs_->free_index[3 * node_r + first]]) + nbr_off_[it - nbr_.data()];
  return blk;
}

long long SparsePattern::position(int node_r, int field_r, int node_c, int field_c) const {
  if (fidx_[node_r][field_r] < 0 || fidx_[node_c][field_c] < 0) return -1;
  return block(node_r, node_c).pos(field_r, field_c);
}

namespace {

void scatter(const SparsePattern* pat, const int* nodes, const ElementContribution& c, Eigen::VectorXd& R,
             SparseMatrixR* K) {
  const int nb = c.nb;
  for (int a = 0; a < nb; ++a)
    for (int f = 0; f < 3; ++f) R[3 * nodes[a] + f] += c.R[3 * a + f];
  if (!K) return;
  double* vals = K->valuePtr();
  for (int a = 0; a < nb; ++a)
    for (int b = 0; b < nb; ++b) {
      const auto blk = pat->block(nodes[a], nodes[b]);
      for (int f = 0; f < 3; ++f) {
        if ((*blk.fr)[f] < 0) continue;
        for (int g = 0; g < 3; ++g)
          if ((*blk.fc)[g] >= 0) vals[blk.pos(f, g)] += c.K(3 * a + f, 3 * b + g);
      }
    }
}

}  // namespace

void assemble(const Problem& pb, const DofMap& dofs, const SparsePattern* pattern, const Eigen::VectorXd& U,
              const Eigen::VectorXd& U_prev, const AssemblyOptions& opts, Eigen::VectorXd& R_full,
              SparseMatrixR* K) {
  const SpaceTimeMesh& mesh = *pb.mesh;
  if (U.size() != dofs.num_dofs() || U_prev.size() != dofs.num_dofs())
    throw std::invalid_argument("state size does not match the dof map");
  R_full.setZero(dofs.num_dofs());
  SparseMatrixR* Kp = opts.jacobian ? K : nullptr;
  if (Kp && !pattern) throw std::invalid_argument("Jacobian assembly needs a sparsity pattern");
  if (Kp) std::fill(Kp->valuePtr(), Kp->valuePtr() + Kp->nonZeros(), 0.0);
  const int nl = mesh.num_local();
  int nodes[kMaxLocal];
  std::vector<double> Ul(3 * nl), Upl(3 * nl);
  auto gather = [&](int e) {
    mesh.local_nodes(e, nodes);
    for (int a = 0; a < nl; ++a)
      for (int f = 0; f < 3; ++f) {
        Ul[3 * a + f] = U[3 * nodes[a] + f];
        Upl[3 * a + f] = U_prev[3 * nodes[a] + f];
      }
  };
  ElementContribution c;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    gather(e);
    try {
      element_residual(mesh, e, Ul.data(), Upl.data(), pb.props, pb.stab, opts.kernel, c, Kp != nullptr);
    } catch (const DomainError& ex) {
      throw GeometryError(std::string("element evaluation failed: ") + ex.what(), e);
    }
    scatter(pattern, nodes, c, R_full, Kp);
  }
  const int nspe = static_cast<int>(mesh.sp_elems.size());
  for (int ts = 0; ts < mesh.num_t_spans(); ++ts)
    for (size_t ie = 0; ie < mesh.edges.size(); ++ie) {
      const FaceTag tag = mesh.edges[ie].tag;
      if (tag != FaceTag::Interior && tag != FaceTag::Neumann) continue;
      gather(mesh.edges[ie].sp_elem + nspe * ts);
      if (tag == FaceTag::Interior)
        face_residual_weak_bc(mesh, static_cast<int>(ie), ts, Ul.data(), pb.props, pb.stab, c, Kp != nullptr);
      else
        face_residual_outflow(mesh, static_cast<int>(ie), ts, Ul.data(), pb.props, c, Kp != nullptr);
      scatter(pattern, nodes, c, R_full, Kp);
    }
}

Eigen::VectorXd restrict_free(const DofMap& dofs, const Eigen::VectorXd& full) {
  Eigen::VectorXd r(dofs.num_free());
  for (int i = 0; i < dofs.num_free(); ++i) r[i] = full[dofs.free_dofs[i]];
  return r;
}

Eigen::VectorXd initial_state(const DofMap& dofs, const Eigen::Vector2d& free_stream) {
  Eigen::VectorXd U = Eigen::VectorXd::Zero(dofs.num_dofs());
  for (int n = 0; n < dofs.num_nodes; ++n) {
    U[3 * n] = free_stream[0];
    U[3 * n + 1] = free_stream[1];
  }
  for (int k = 0; k < dofs.num_dofs(); ++k)
    if (dofs.strong[k]) U[k] = dofs.prescribed[k];
  return U;
}

Eigen::VectorXd global_residual(const Problem& pb, const DofMap& dofs, const Eigen::VectorXd& U) {
  Eigen::VectorXd R;
  AssemblyOptions opts;
  opts.jacobian = false;
  assemble(pb, dofs, nullptr, U, U, opts, R, nullptr);
  return R;
}

}  // namespace stflow
