#include "stflow/formulation.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <type_traits>

#include "stflow/dual.hpp"
#include "stflow/errors.hpp"

namespace stflow {

void FlowProperties::validate() const {
  if (!(nu > 0)) throw std::invalid_argument("viscosity must be positive");
  if (!(rho > 0)) throw std::invalid_argument("density must be positive");
  if (!(s > 0)) throw std::invalid_argument("space-time scale s must be positive");
  if (!(a > 0)) throw std::invalid_argument("artificial speed of sound must be positive");
}

double tau_M(const Eigen::Vector3d& uhat, const Eigen::Matrix3d& Ghat, const Eigen::Matrix2d& G, double nu,
             double C_I) {
  const double arg = uhat.dot(Ghat * uhat) + C_I * nu * nu * (G.array() * G.array()).sum();
  if (!(arg > 0)) throw DomainError("tau_M undefined: zero velocity and zero viscosity");
  return 1.0 / std::sqrt(arg);
}

double tau_C(double tauM, const Eigen::Matrix2d& G) { return 1.0 / (tauM * G.trace()); }

double tau_b(double nu, const Eigen::Matrix2d& G, const Eigen::Vector2d& n, double C_Ib) {
  return 0.5 * C_Ib * nu * std::sqrt(n.dot(G * n));
}

StrongResiduals strong_residuals(const Eigen::Vector3d& uhat, const Eigen::Matrix<double, 2, 3>& grad_u,
                                 const Eigen::Vector2d& lap_u, const Eigen::Vector2d& grad_p,
                                 const Eigen::Vector2d& f, double nu) {
  StrongResiduals r;
  r.r_M = grad_u * uhat + grad_p - nu * lap_u - f;
  r.r_C = grad_u(0, 0) + grad_u(1, 1);
  return r;
}

namespace {

const QuadratureRule& cached_rule(const std::vector<int>& dims) {
  thread_local std::map<std::vector<int>, QuadratureRule> cache;
  auto it = cache.find(dims);
  if (it == cache.end()) it = cache.emplace(dims, make_quadrature(dims)).first;
  return it->second;
}

template <class S>
void seed(S& x, int idx, double coef, double basis) {
  if constexpr (is_dual_v<S>) {
    x.v += coef * basis;
    x.d[idx] = basis;
  } else {
    (void)idx;
    x += coef * basis;
  }
}

template <class S>
S constant_of(const S& x) {
  if constexpr (is_dual_v<S>) return S(x.v);
  else return x;
}

template <class S>
struct QpFields {
  S u[2];
  S gu[2][3];
  S lap[2];
  S p;
  S gp[3];
};

template <class S>
void gather(const PointEval& pe, const double* U, QpFields<S>& q) {
  for (int i = 0; i < 2; ++i) {
    q.u[i] = S(0.0);
    q.lap[i] = S(0.0);
    for (int J = 0; J < 3; ++J) q.gu[i][J] = S(0.0);
  }
  q.p = S(0.0);
  for (int J = 0; J < 3; ++J) q.gp[J] = S(0.0);
  for (int a = 0; a < pe.nb; ++a) {
    for (int i = 0; i < 2; ++i) {
      const double c = U[3 * a + i];
      seed(q.u[i], 3 * a + i, c, pe.N[a]);
      seed(q.lap[i], 3 * a + i, c, pe.lapN[a]);
      for (int J = 0; J < 3; ++J) seed(q.gu[i][J], 3 * a + i, c, pe.dN[a][J]);
    }
    const double c = U[3 * a + 2];
    seed(q.p, 3 * a + 2, c, pe.N[a]);
    for (int J = 0; J < 3; ++J) seed(q.gp[J], 3 * a + 2, c, pe.dN[a][J]);
  }
}

struct QpContext {
  const PointEval* pe;
  const FlowProperties* props;
  const StabConstants* stab;
  const KernelOptions* opts;
  bool steady;
  bool drop_laplacian;
  double u_prev[3];
  Eigen::Vector2d f;
};

// Flux form of the volume integrand: the residual is sum_a N_a A_f + dN_a . B_f.
template <class S>
void volume_flux(const QpFields<S>& q, const QpContext& c, S A[3], S B[3][3]) {
  const auto& pe = *c.pe;
  const double nu = c.props->nu;
  const double s = c.props->s;
  S uh[3] = {q.u[0], q.u[1], S(c.steady ? 0.0 : s)};

  S conv[2];
  for (int i = 0; i < 2; ++i) {
    conv[i] = uh[0] * q.gu[i][0] + uh[1] * q.gu[i][1];
    if (!c.steady) conv[i] += s * q.gu[i][2];
  }
  S rM[2];
  for (int i = 0; i < 2; ++i) {
    rM[i] = conv[i] + q.gp[i] - c.f[i];
    if (!c.drop_laplacian) rM[i] -= nu * q.lap[i];
  }
  const S rC = q.gu[0][0] + q.gu[1][1];

  S up[2] = {S(0.0), S(0.0)};
  S pp(0.0);
  if (c.opts->stabilization) {
    S uGu(0.0);
    for (int I = 0; I < 3; ++I)
      for (int J = 0; J < 3; ++J)
        if (pe.Ghat(I, J) != 0.0) uGu += pe.Ghat(I, J) * (uh[I] * uh[J]);
    const double visc = c.stab->C_I * nu * nu * (pe.G.array() * pe.G.array()).sum();
    if (!(value_of(uGu) + visc > 0)) throw DomainError("tau_M undefined: zero velocity and zero viscosity");
    S tM = rsqrt(uGu + visc);
    if (c.opts->freeze_tau) tM = constant_of(tM);
    const S tC = 1.0 / (tM * pe.G.trace());
    up[0] = -(tM * rM[0]);
    up[1] = -(tM * rM[1]);
    pp = -(tC * rC);
  }

  for (int i = 0; i < 2; ++i) {
    A[i] = c.opts->galerkin ? conv[i] - c.f[i] : S(0.0);
    if (c.opts->pseudo_time) A[i] += (q.u[i] - c.u_prev[i]) * (1.0 / c.opts->dtheta);
    for (int J = 0; J < 3; ++J) B[i][J] = S(0.0);
    if (c.opts->galerkin) {
      for (int j = 0; j < 2; ++j) B[i][j] = nu * q.gu[i][j];
      B[i][i] -= q.p;
    }
    if (c.opts->stabilization) {
      for (int j = 0; j < 2; ++j) {
        B[i][j] -= q.u[i] * up[j];   // cross term   (grad w, u (x) u')
        B[i][j] -= up[i] * up[j];    // Reynolds     (grad w, u' (x) u')
        B[i][j] -= uh[j] * up[i];    // SUPG, spatial part of (gradhat what, u' (x) uhat)
      }
      if (!c.steady) B[i][2] -= s * up[i];  // SUPG, temporal part
      B[i][i] -= pp;                         // LSIC
    }
  }
  A[2] = c.opts->galerkin ? rC : S(0.0);
  if (c.opts->pseudo_time)
    A[2] += (q.p - c.u_prev[2]) * (1.0 / (c.props->a * c.props->a * c.opts->dtheta));
  for (int J = 0; J < 3; ++J) B[2][J] = S(0.0);
  if (c.opts->stabilization)
    for (int j = 0; j < 2; ++j) B[2][j] = -up[j];  // PSPG
}

template <class S>
void store(int nb, const S* Rl, ElementContribution& out, bool jacobian) {
  out.nb = nb;
  out.R.resize(3 * nb);
  for (int r = 0; r < 3 * nb; ++r) out.R[r] = value_of(Rl[r]);
  if constexpr (is_dual_v<S>) {
    if (jacobian) {
      out.K.resize(3 * nb, 3 * nb);
      for (int r = 0; r < 3 * nb; ++r)
        for (int k = 0; k < 3 * nb; ++k) out.K(r, k) = Rl[r].d[k];
    }
  }
}

template <class S, int NB>
void element_impl(const SpaceTimeMesh& mesh, int e, const double* U, const double* Up,
                  const FlowProperties& props, const StabConstants& stab, const KernelOptions& opts,
                  ElementContribution& out, bool jacobian) {
  const int p = mesh.degree();
  const QuadratureRule& q = element_quadrature(mesh);
  std::array<S, 3 * NB> Rl;
  for (auto& r : Rl) r = S(0.0);
  PointEval pe;
  QpFields<S> f;
  QpContext ctx{&pe, &props, &stab, &opts, mesh.steady(), p < 2, {0, 0, 0}, Eigen::Vector2d::Zero()};
  S A[3], B[3][3];
  for (int iq = 0; iq < q.size(); ++iq) {
    mesh.eval_point(e, q.point(iq), pe, p >= 2);
    gather(pe, U, f);
    ctx.u_prev[0] = ctx.u_prev[1] = ctx.u_prev[2] = 0.0;
    if (opts.pseudo_time)
      for (int a = 0; a < NB; ++a)
        for (int k = 0; k < 3; ++k) ctx.u_prev[k] += Up[3 * a + k] * pe.N[a];
    ctx.f = props.body_force ? props.body_force(pe.xhat) : Eigen::Vector2d::Zero();
    volume_flux(f, ctx, A, B);
    const double w = q.weights[iq] * pe.detJ;
    for (int k = 0; k < 3; ++k) {
      A[k] *= w;
      for (int J = 0; J < 3; ++J) B[k][J] *= w;
    }
    const int nJ = mesh.steady() ? 2 : 3;
    for (int a = 0; a < NB; ++a)
      for (int k = 0; k < 3; ++k) {
        S& r = Rl[3 * a + k];
        if constexpr (is_dual_v<S>) {
          r.axpy(pe.N[a], A[k]);
          for (int J = 0; J < nJ; ++J) r.axpy(pe.dN[a][J], B[k][J]);
        } else {
          r += pe.N[a] * A[k];
          for (int J = 0; J < nJ; ++J) r += pe.dN[a][J] * B[k][J];
        }
      }
  }
  store(NB, Rl.data(), out, jacobian);
}

template <class S, int NB>
void wbc_impl(const SpaceTimeMesh& mesh, int edge, int ts, const double* U, const FlowProperties& props,
              const StabConstants& stab, ElementContribution& out, bool jacobian) {
  const QuadratureRule& q = face_quadrature(mesh);
  std::array<S, 3 * NB> Rl;
  for (auto& r : Rl) r = S(0.0);
  PointEval pe;
  FaceEval fe;
  QpFields<S> f;
  const double nu = props.nu;
  for (int iq = 0; iq < q.size(); ++iq) {
    double xi[3];
    mesh.face_to_local(edge, q.point(iq)[0], q.dim > 1 ? q.point(iq)[1] : 0.5, xi);
    mesh.eval_face(edge, ts, xi, pe, fe);
    gather(pe, U, f);
    const double w = q.weights[iq] * fe.dsigma;
    const double tb = tau_b(nu, pe.G, fe.n, stab.C_Ib);
    const auto& n = fe.n;
    S jump[2] = {f.u[0] - fe.g[0], f.u[1] - fe.g[1]};
    // traction-like consistency flux p n - nu grad u . n
    S cons[2];
    for (int i = 0; i < 2; ++i) cons[i] = f.p * n[i] - nu * (f.gu[i][0] * n[0] + f.gu[i][1] * n[1]);
    const S jn = jump[0] * n[0] + jump[1] * n[1];
    for (int a = 0; a < NB; ++a) {
      const double Na = pe.N[a] * w;
      const double dNn = (pe.dN[a][0] * n[0] + pe.dN[a][1] * n[1]) * w;
      for (int i = 0; i < 2; ++i) {
        S& r = Rl[3 * a + i];
        if constexpr (is_dual_v<S>) {
          r.axpy(Na, cons[i]);
          r.axpy(nu * dNn + Na * tb, jump[i]);
        } else {
          r += Na * cons[i] + (nu * dNn + Na * tb) * jump[i];
        }
      }
      if constexpr (is_dual_v<S>) Rl[3 * a + 2].axpy(-Na, jn);
      else Rl[3 * a + 2] += -Na * jn;
    }
  }
  store(NB, Rl.data(), out, jacobian);
}

template <class S, int NB>
void outflow_impl(const SpaceTimeMesh& mesh, int edge, int ts, const double* U, ElementContribution& out,
                  bool jacobian) {
  const QuadratureRule& q = face_quadrature(mesh);
  std::array<S, 3 * NB> Rl;
  for (auto& r : Rl) r = S(0.0);
  PointEval pe;
  FaceEval fe;
  QpFields<S> f;
  for (int iq = 0; iq < q.size(); ++iq) {
    double xi[3];
    mesh.face_to_local(edge, q.point(iq)[0], q.dim > 1 ? q.point(iq)[1] : 0.5, xi);
    mesh.eval_face(edge, ts, xi, pe, fe);
    gather(pe, U, f);
    const double w = q.weights[iq] * fe.dsigma;
    const S un = f.u[0] * fe.n[0] + f.u[1] * fe.n[1];
    using std::abs;
    const S unm = 0.5 * (un - abs(un));
    if (value_of(unm) == 0.0) continue;
    for (int i = 0; i < 2; ++i) {
      const S flux = unm * f.u[i];
      for (int a = 0; a < NB; ++a) {
        if constexpr (is_dual_v<S>) Rl[3 * a + i].axpy(-pe.N[a] * w, flux);
        else Rl[3 * a + i] += -pe.N[a] * w * flux;
      }
    }
  }
  store(NB, Rl.data(), out, jacobian);
}

template <class F>
void dispatch(int nb, F&& f) {
  switch (nb) {
    case 4: return f(std::integral_constant<int, 4>{});
    case 8: return f(std::integral_constant<int, 8>{});
    case 9: return f(std::integral_constant<int, 9>{});
    case 12: return f(std::integral_constant<int, 12>{});
    case 16: return f(std::integral_constant<int, 16>{});
    case 18: return f(std::integral_constant<int, 18>{});
    case 27: return f(std::integral_constant<int, 27>{});
    case 36: return f(std::integral_constant<int, 36>{});
    default:
      throw std::invalid_argument("unsupported local basis size " + std::to_string(nb));
  }
}

}  // namespace

const QuadratureRule& element_quadrature(const SpaceTimeMesh& mesh) {
  const int p = mesh.degree();
  return cached_rule({p + 1, p + 1, mesh.steady() ? 1 : mesh.time.degree + 1});
}

const QuadratureRule& face_quadrature(const SpaceTimeMesh& mesh) {
  const int p = mesh.degree();
  return cached_rule({p + 1, mesh.steady() ? 1 : mesh.time.degree + 1});
}

void element_residual(const SpaceTimeMesh& mesh, int e, const double* U, const double* U_prev,
                      const FlowProperties& props, const StabConstants& stab, const KernelOptions& opts,
                      ElementContribution& out, bool jacobian) {
  dispatch(mesh.num_local(), [&](auto nbc) {
    constexpr int NB = decltype(nbc)::value;
    if (jacobian) element_impl<Dual<3 * NB>, NB>(mesh, e, U, U_prev, props, stab, opts, out, true);
    else element_impl<double, NB>(mesh, e, U, U_prev, props, stab, opts, out, false);
  });
}

void face_residual_weak_bc(const SpaceTimeMesh& mesh, int edge, int t_span, const double* U,
                           const FlowProperties& props, const StabConstants& stab, ElementContribution& out,
                           bool jacobian) {
  dispatch(mesh.num_local(), [&](auto nbc) {
    constexpr int NB = decltype(nbc)::value;
    if (jacobian) wbc_impl<Dual<3 * NB>, NB>(mesh, edge, t_span, U, props, stab, out, true);
    else wbc_impl<double, NB>(mesh, edge, t_span, U, props, stab, out, false);
  });
}

void face_residual_outflow(const SpaceTimeMesh& mesh, int edge, int t_span, const double* U,
                           const FlowProperties& /*props*/, ElementContribution& out, bool jacobian) {
  dispatch(mesh.num_local(), [&](auto nbc) {
    constexpr int NB = decltype(nbc)::value;
    if (jacobian) outflow_impl<Dual<3 * NB>, NB>(mesh, edge, t_span, U, out, true);
    else outflow_impl<double, NB>(mesh, edge, t_span, U, out, false);
  });
}

}  // namespace stflow
