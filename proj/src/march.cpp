#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "stflow/errors.hpp"
#include "stflow/solver.hpp"

namespace stflow {

void SolverConfig::validate() const {
  if (!(dtheta > 0)) throw ConfigError("pseudo-time step must be positive");
  if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
  if (newton_iterations < 1) throw ConfigError("newton_iterations must be >= 1");
  if (max_halvings < 0) throw ConfigError("max_halvings must be >= 0");
  if (growth_limit < 0 || (growth_limit > 0 && growth_limit <= 1))
    throw ConfigError("growth_limit must be 0 (off) or greater than 1");
  if (!(min_dtheta_ratio > 0) || min_dtheta_ratio > 1) throw ConfigError("min_dtheta_ratio must be in (0, 1]");
  if (!(tolerance > 0)) throw ConfigError("residual tolerance must be positive");
  if (!(linear.tolerance > 0) || linear.max_iterations < 1 || linear.restart < 1)
    throw ConfigError("linear solver settings must be positive");
}

double ResidualNorms::total() const { return std::sqrt(mom_x * mom_x + mom_y * mom_y + mass * mass); }

ResidualNorms residual_norms(const DofMap& dofs, const Eigen::VectorXd& R_full) {
  double s[3] = {0, 0, 0};
  for (int dof : dofs.free_dofs) s[dof % 3] += R_full[dof] * R_full[dof];
  return {std::sqrt(s[0]), std::sqrt(s[1]), std::sqrt(s[2])};
}

ConvergenceReport pseudo_transient_march(const Problem& pb, const DofMap& dofs, Eigen::VectorXd& U,
                                         const SolverConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  pb.props.validate();
  if (U.size() != dofs.num_dofs()) throw std::invalid_argument("state size does not match the dof map");
  for (int k = 0; k < dofs.num_dofs(); ++k)
    if (dofs.strong[k]) U[k] = dofs.prescribed[k];

  const SparsePattern pattern(*pb.mesh, dofs);
  SparseSystem sys;
  sys.A = pattern.make_matrix();
  sys.block_starts = dofs.block_starts;
  AssemblyOptions aopt;
  aopt.kernel.pseudo_time = true;
  aopt.kernel.dtheta = cfg.dtheta;
  aopt.kernel.freeze_tau = cfg.freeze_tau;
  Eigen::VectorXd R;
  ConvergenceReport rep;
  auto say = [&](const std::string& s) {
    if (progress) progress(s);
  };

  const bool adaptive = cfg.growth_limit > 0;
  double dtheta = cfg.dtheta, theta = 0, accepted_norm = 0;
  Eigen::VectorXd U_accepted;
  bool have_accepted = false, solve_failed = false;
  for (int step = 0; step <= cfg.max_steps; ++step) {
    const bool last = step == cfg.max_steps;
    aopt.jacobian = !last;
    aopt.kernel.dtheta = dtheta;
    assemble(pb, dofs, &pattern, U, U, aopt, R, &sys.A);
    const ResidualNorms nrm = residual_norms(dofs, R);
    if (adaptive && have_accepted &&
        (solve_failed || !std::isfinite(nrm.total()) || nrm.total() > cfg.growth_limit * accepted_norm)) {
      theta -= dtheta;
      dtheta *= 0.25;
      if (dtheta < cfg.dtheta * cfg.min_dtheta_ratio) {
        rep.final_norms = nrm;
        rep.message = "pseudo-time step fell below the minimum at step " + std::to_string(step);
        return rep;
      }
      std::ostringstream os;
      os << std::scientific << std::setprecision(3) << "step " << step << " rejected |r| " << nrm.total()
         << ", retry with dtheta " << dtheta;
      say(os.str());
      U = U_accepted;
      solve_failed = false;
      aopt.kernel.dtheta = dtheta;
      assemble(pb, dofs, &pattern, U, U, aopt, R, &sys.A);
      ++rep.rejected_steps;
    } else {
      rep.history.push_back({theta, nrm});
      rep.final_norms = nrm;
      {
        std::ostringstream os;
        os << std::scientific << std::setprecision(3) << "step " << step << " theta " << theta << " |r| "
           << nrm.total() << " (mom " << nrm.mom_x << ", " << nrm.mom_y << ", mass " << nrm.mass << ")";
        say(os.str());
      }
      if (!std::isfinite(nrm.total())) {
        rep.message = "residual is not finite at step " + std::to_string(step);
        return rep;
      }
      if (nrm.total() < cfg.tolerance) {
        rep.converged = true;
        rep.steps = step;
        rep.message = "converged at step " + std::to_string(step);
        return rep;
      }
      if (adaptive) {
        const double grown = have_accepted ? std::min(cfg.dtheta, 2 * dtheta) : dtheta;
        if (grown != dtheta && !last) {
          dtheta = grown;
          aopt.kernel.dtheta = dtheta;
          assemble(pb, dofs, &pattern, U, U, aopt, R, &sys.A);
        }
        U_accepted = U;
        accepted_norm = nrm.total();
        have_accepted = true;
      }
    }
    if (last) break;
    // At the start of a step U = U_prev, so the pseudo-time terms vanish.
    const Eigen::VectorXd U_prev = U;
    theta += dtheta;
    double r0 = 0;
    Eigen::VectorXd U_trial = U, R_trial;
    AssemblyOptions ropt = aopt;
    for (int it = 0; it < cfg.newton_iterations; ++it) {
      if (it > 0) assemble(pb, dofs, &pattern, U, U_prev, aopt, R, &sys.A);
      sys.b = -restrict_free(dofs, R);
      const double rn = sys.b.norm();
      if (it == 0) r0 = rn;
      NewtonLogEntry log{step, it, rn, 0};
      if (cfg.early_exit && it > 0 && (rn < 1e-2 * r0 || rn < 1e-2 * cfg.tolerance)) {
        rep.newton_log.push_back(log);
        break;
      }
      LinearSolveStats st;
      Eigen::VectorXd dx;
      try {
        dx = linear_solve(sys, cfg.linear, &st);
      } catch (const SolverError&) {
        if (!adaptive || !have_accepted) throw;
        solve_failed = true;
        break;
      }
      log.linear_iterations = st.iterations;
      double lambda = 1.0;
      for (int h = 0; h <= cfg.max_halvings; ++h, lambda *= 0.5) {
        for (int i = 0; i < dofs.num_free(); ++i) U_trial[dofs.free_dofs[i]] = U[dofs.free_dofs[i]] + lambda * dx[i];
        if (h == cfg.max_halvings) break;
        ropt.jacobian = false;
        ropt.kernel.dtheta = dtheta;
        assemble(pb, dofs, nullptr, U_trial, U_prev, ropt, R_trial, nullptr);
        const double rt = restrict_free(dofs, R_trial).norm();
        if (std::isfinite(rt) && rt < rn) break;
      }
      log.step_length = lambda;
      rep.newton_log.push_back(log);
      U.swap(U_trial);
      ++rep.newton_iterations;
    }
    rep.steps = step + 1;
  }
  rep.message = "not converged after " + std::to_string(cfg.max_steps) + " pseudo-time steps";
  return rep;
}

void write_residual_csv(const ConvergenceReport& report, std::ostream& os) {
  os << "theta,res_mom_x1,res_mom_x2,res_mass\n";
  os << std::setprecision(12);
  for (const auto& h : report.history)
    os << h.theta << "," << h.norms.mom_x << "," << h.norms.mom_y << "," << h.norms.mass << "\n";
}

}  // namespace stflow
