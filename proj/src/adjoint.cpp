#include "airest/adjoint.hpp"

#include <cmath>

namespace airest {

namespace {

// Dual vector of the tracking-mismatch source at one time level:
// sum_i 2 (y_i - yhat_i) phi_i.
VecX mismatch_source(const std::vector<VecX>& phi, const Eigen::MatrixXd& y,
                     const SensorRecord& sensors, int k) {
  VecX s = VecX::Zero(phi.empty() ? 0 : phi[0].size());
  for (std::size_t i = 0; i < phi.size(); ++i)
    s += 2.0 * (y(static_cast<int>(i), k) - sensors.y(static_cast<int>(i), k)) * phi[i];
  return s;
}

}  // namespace

std::vector<VecX> adjoint_backward(const ThermalOperator& adjoint_op,
                                   const std::vector<VecX>& sources) {
  const int n = static_cast<int>(sources.size()) - 1;
  if (n < 1) throw ValidationError("adjoint_backward: need at least two source levels");
  const int ndof = static_cast<int>(sources[0].size());
  std::vector<VecX> lambda(n + 1, VecX::Zero(ndof));
  // lambda(T) = 0; marching backward, the source of the interval
  // [t_k, t_{k+1}] enters with trapezoid weights so the cumulative weighting
  // matches the cost quadrature.
  for (int k = n - 1; k >= 0; --k) {
    VecX rhs = (1.0 / adjoint_op.dt) * (adjoint_op.mass * lambda[k + 1]);
    rhs -= 0.5 * (sources[k] + sources[k + 1]);
    for (int d : adjoint_op.boundary) rhs[d] = 0.0;
    VecX lam = adjoint_op.lu.solve(rhs);
    for (int d : adjoint_op.boundary) lam[d] = 0.0;
    lambda[k] = std::move(lam);
  }
  return lambda;
}

AdjointTemperature solve_adjoint_temperature(const Model& model,
                                             const TemperatureTrajectory& traj,
                                             const SensorRecord& sensors,
                                             const ThermalOperator& adjoint_op) {
  const int n = traj.n_steps();
  if (sensors.y.cols() != n + 1)
    throw ValidationError("solve_adjoint_temperature: sensor grid mismatch");
  const std::vector<VecX> phi = model.phi_subset(sensors.sensor_ids);

  // predicted readings on the trajectory
  Eigen::MatrixXd y(phi.size(), n + 1);
  for (std::size_t i = 0; i < phi.size(); ++i)
    for (int k = 0; k <= n; ++k) y(static_cast<int>(i), k) = phi[i].dot(traj.fields[k]);

  std::vector<VecX> sources(n + 1);
  for (int k = 0; k <= n; ++k) sources[k] = mismatch_source(phi, y, sensors, k);

  AdjointTemperature out;
  out.lambda1 = adjoint_backward(adjoint_op, sources);
  out.lambda6 = out.lambda1[0];
  return out;
}

AdjointFlow solve_adjoint_flow(const Model& model, const std::vector<VecX>& lambda1,
                               const TemperatureTrajectory& traj, const FlowSolution& flow,
                               const VecX& theta) {
  const FemSpace& V = model.V;
  const FemSpace& S = model.S;
  const Mesh& mesh = model.mesh;
  const int n = traj.n_steps();
  const VecX w = trapezoid_weights(n, traj.dt);

  // forcing F[(i,a)] = int_Omega (int_0^T lambda1 grad T_e dt)_a N_i
  VecX F = VecX::Zero(V.n_dofs);
  const QuadRule& rule = triangle_rule(4);
  int nodes[6];
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    V.element_nodes(t, nodes);
    const auto& tr = mesh.triangles[t];
    // time-integrated (lambda1 grad T_e) evaluated per quadrature point;
    // grad T_e is constant per element for P1 fields
    for (int q = 0; q < rule.size(); ++q) {
      const auto& b = rule.bary[q];
      Vec2 acc = Vec2::Zero();
      for (int k = 0; k <= n; ++k) {
        const VecX& lam = lambda1[k];
        const Real lam_q = b[0] * lam[tr[0]] + b[1] * lam[tr[1]] + b[2] * lam[tr[2]];
        if (lam_q == 0.0) continue;
        acc += w[k] * lam_q * eval_p1_gradient(S, traj.fields[k], t);
      }
      const Real wq = rule.weights[q] * mesh.tri_area[t];
      Real N[6];
      p2_basis(b, N);
      for (int i = 0; i < 6; ++i) {
        F[2 * nodes[i]] += wq * N[i] * acc.x();
        F[2 * nodes[i] + 1] += wq * N[i] * acc.y();
      }
    }
  }

  // A = (1/Re) K + alpha M + N(u)^T - C(u); pressure coupling with +D^T
  SpMat A = (1.0 / model.params.Re) * (*model.laplacian);
  A += assemble_vector_mass(V, model.alpha_elem(theta));
  A += SpMat(assemble_ns_linearization(V, flow.u).transpose());
  A -= assemble_ns_convection(V, flow.u);
  SpMat sys = saddle_matrix(A, *model.divergence, 1.0);

  VecX rhs(V.n_dofs + model.P.n_dofs);
  rhs.head(V.n_dofs) = -F;
  rhs.tail(model.P.n_dofs).setZero();

  std::vector<int> fixed = model.all_velocity_bdofs;
  fixed.push_back(V.n_dofs + 0);  // lambda3 gauge: lambda2 is Dirichlet on the
                                  // whole boundary, so the pressure level is free
  apply_dirichlet_zero(sys, rhs, fixed);

  SparseFactor lu;
  try {
    lu.factorize(sys);
  } catch (const SolverError& e) {
    throw SolverError(std::string("adjoint flow system singular (gauge?): ") + e.what());
  }
  VecX x = lu.solve(rhs);
  const Real res = (sys * x - rhs).norm();
  if (res > 1e-8 * std::max(1.0, rhs.norm())) {
    x += lu.solve(rhs - sys * x);
  }

  AdjointFlow out;
  out.lambda2 = x.head(V.n_dofs);
  out.lambda3 = x.tail(model.P.n_dofs);
  for (int d : model.all_velocity_bdofs) out.lambda2[d] = 0.0;
  out.factor_bytes = lu.factor_bytes();
  return out;
}

FrechetFields frechet_fields(const Model& model, const std::vector<VecX>& lambda1,
                             const VecX& lambda2, const TemperatureTrajectory& traj,
                             const FlowSolution& flow) {
  const Mesh& mesh = model.mesh;
  const FemSpace& V = model.V;
  const FemSpace& S = model.S;
  const int n = traj.n_steps();
  const VecX w = trapezoid_weights(n, traj.dt);

  FrechetFields f;
  f.d_alpha_elem = VecX::Zero(mesh.n_triangles());
  f.d_kappa_elem = VecX::Zero(mesh.n_triangles());

  const QuadRule& rule = triangle_rule(4);
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    Real a = 0;
    for (int q = 0; q < rule.size(); ++q) {
      const Vec2 l2 = eval_velocity(V, lambda2, t, rule.bary[q]);
      const Vec2 uq = eval_velocity(V, flow.u, t, rule.bary[q]);
      a += rule.weights[q] * mesh.tri_area[t] * l2.dot(uq);
    }
    f.d_alpha_elem[t] = a;

    Real kacc = 0;  // gradients constant per element: spatial integral exact
    for (int k = 0; k <= n; ++k) {
      const Vec2 gl = eval_p1_gradient(S, lambda1[k], t);
      const Vec2 gt = eval_p1_gradient(S, traj.fields[k], t);
      kacc += w[k] * gl.dot(gt);
    }
    f.d_kappa_elem[t] = kacc * mesh.tri_area[t];
  }
  return f;
}

GradientBundle gradient(const Model& model, const VecX& lambda6, const FrechetFields& fields,
                        const VecX& pi0, const SensorRecord& sensors, Real eta0, Real eta1) {
  GradientBundle g;
  g.fields = fields;

  // d_theta[i] = <D_alpha J, d alpha/d theta_i> + <D_kappa J, d kappa/d theta_i>
  // with d alpha/d theta_i = -(alpha_w - alpha0) I_i, analogously for kappa.
  const Real da = -(model.params.alpha_w - model.params.alpha0);
  const Real dk = -(model.params.kappa_w - model.params.kappa0);
  g.d_theta = VecX::Zero(model.n_doors());
  for (int i = 0; i < model.n_doors(); ++i) {
    Real acc = 0;
    for (int e : model.door_elems[i])
      acc += da * fields.d_alpha_elem[e] + dk * fields.d_kappa_elem[e];
    g.d_theta[i] = acc;
  }

  // d_pi0 = Riesz( 2 eta0 sum_i (phi_i^T pi0 - pi0hat_i) phi_i
  //               + M (2 eta1 pi0 - lambda6) )
  const std::vector<VecX> phi = model.phi_subset(sensors.sensor_ids);
  VecX dual = model.mass * (2.0 * eta1 * pi0 - lambda6);
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const Real m0 = phi[i].dot(pi0) - sensors.pi0_hat[static_cast<int>(i)];
    dual += 2.0 * eta0 * m0 * phi[i];
  }
  g.d_pi0 = model.riesz_interior(std::move(dual));
  return g;
}

GradientBundle adjoint_gradient(const Model& model, const VecX& theta, const VecX& pi0,
                                const FlowSolution& flow, const TemperatureTrajectory& traj,
                                const SensorRecord& sensors, Real eta0, Real eta1,
                                std::size_t* transient_bytes) {
  const ThermalOperator adj_op =
      make_thermal_operator(model.S, model.V, flow.u, model.kappa_elem(theta), traj.dt, true);
  const AdjointTemperature at = solve_adjoint_temperature(model, traj, sensors, adj_op);
  const AdjointFlow af = solve_adjoint_flow(model, at.lambda1, traj, flow, theta);
  if (transient_bytes) {
    *transient_bytes = adj_op.bytes() + af.factor_bytes +
                       at.lambda1.size() * static_cast<std::size_t>(model.S.n_dofs) *
                           sizeof(Real);
  }
  const FrechetFields ff = frechet_fields(model, at.lambda1, af.lambda2, traj, flow);
  return gradient(model, at.lambda6, ff, pi0, sensors, eta0, eta1);
}

TangentSolution tangent_solve(const Model& model, const VecX& theta, const VecX& pi0,
                              const FlowSolution& flow, const TemperatureTrajectory& traj,
                              const SensorRecord& sensors, const VecX& delta_pi0,
                              const VecX& delta_theta, Real eta0, Real eta1) {
  if (delta_theta.size() != model.n_doors())
    throw ValidationError("tangent_solve: delta_theta dimension mismatch");
  const FemSpace& V = model.V;
  const FemSpace& S = model.S;
  const int n = traj.n_steps();

  // material perturbations induced by delta_theta (affine map, exact)
  VecX dalpha = VecX::Zero(model.mesh.n_triangles());
  VecX dkappa = VecX::Zero(model.mesh.n_triangles());
  const Real da = -(model.params.alpha_w - model.params.alpha0);
  const Real dk = -(model.params.kappa_w - model.params.kappa0);
  for (int i = 0; i < model.n_doors(); ++i)
    for (int e : model.door_elems[i]) {
      dalpha[e] += da * delta_theta[i];
      dkappa[e] += dk * delta_theta[i];
    }

  TangentSolution out;
  out.delta_u = VecX::Zero(V.n_dofs);
  out.delta_p = VecX::Zero(model.P.n_dofs);

  const bool theta_moved = delta_theta.size() > 0 && delta_theta.norm() > 0;
  if (theta_moved) {
    // linearized flow: J(u) [du; dp] = [-(dalpha u, v); 0]
    SpMat A = (1.0 / model.params.Re) * (*model.laplacian);
    A += assemble_vector_mass(V, model.alpha_elem(theta));
    A += assemble_ns_convection(V, flow.u);
    A += assemble_ns_linearization(V, flow.u);
    SpMat sys = saddle_matrix(A, *model.divergence, -1.0);
    VecX rhs(V.n_dofs + model.P.n_dofs);
    rhs.head(V.n_dofs) = -(assemble_vector_mass(V, dalpha) * flow.u);
    rhs.tail(model.P.n_dofs).setZero();
    std::vector<int> fixed = model.wall_dofs;
    if (!model.has_inlet) fixed.push_back(V.n_dofs + 0);
    apply_dirichlet_zero(sys, rhs, fixed);
    const VecX x = solve_linear(sys, rhs);
    out.delta_u = x.head(V.n_dofs);
    out.delta_p = x.tail(model.P.n_dofs);
  }

  // linearized temperature stepping with the forward operator:
  // (M/dt + K + C) dT^{k+1} = M/dt dT^k - K(dkappa) T^{k+1} - C(du) T^{k+1}
  const ThermalOperator op =
      make_thermal_operator(S, model.V, flow.u, model.kappa_elem(theta), traj.dt, false);
  const SpMat K_dk = assemble_diffusion(S, dkappa);
  SpMat C_du;
  if (theta_moved) C_du = assemble_convection(S, V, out.delta_u);

  out.delta_Te.assign(n + 1, VecX());
  VecX d0 = delta_pi0;
  for (int d : op.boundary) d0[d] = 0.0;
  out.delta_Te[0] = d0;
  for (int k = 0; k < n; ++k) {
    VecX rhs = (1.0 / op.dt) * (op.mass * out.delta_Te[k]);
    rhs -= K_dk * traj.fields[k + 1];
    if (theta_moved) rhs -= C_du * traj.fields[k + 1];
    for (int d : op.boundary) rhs[d] = 0.0;
    VecX next = op.lu.solve(rhs);
    for (int d : op.boundary) next[d] = 0.0;
    out.delta_Te[k + 1] = std::move(next);
  }

  // first variation of the cost along (delta_Te, delta_pi0)
  const std::vector<VecX> phi = model.phi_subset(sensors.sensor_ids);
  const VecX w = trapezoid_weights(n, traj.dt);
  Real dJ = 0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    for (int k = 0; k <= n; ++k) {
      const Real mismatch = phi[i].dot(traj.fields[k]) - sensors.y(static_cast<int>(i), k);
      dJ += w[k] * 2.0 * mismatch * phi[i].dot(out.delta_Te[k]);
    }
    const Real m0 = phi[i].dot(pi0) - sensors.pi0_hat[static_cast<int>(i)];
    dJ += 2.0 * eta0 * m0 * phi[i].dot(delta_pi0);
  }
  dJ += 2.0 * eta1 * pi0.dot(model.mass * delta_pi0);
  out.dJ = dJ;
  return out;
}

Real fd_directional(const Model& model, const VecX& theta, const VecX& pi0,
                    const SensorRecord& sensors, const VecX& delta_pi0, const VecX& delta_theta,
                    Real h, Real eta0, Real eta1, Real horizon, Real dt) {
  if (!(h > 0)) throw ValidationError("fd_directional: h must be positive");
  const VecX tp = theta + h * delta_theta;
  const VecX tm = theta - h * delta_theta;
  if (!DoorConfig{tp}.in_box(1e-12) || !DoorConfig{tm}.in_box(1e-12))
    throw ValidationError("fd_directional: theta +/- h delta leaves [0,1]");
  auto eval = [&](const VecX& th, const VecX& p0) {
    const ForwardResult fr = solve_forward(model, th, p0, horizon, dt);
    return eval_cost(model, fr.traj, p0, sensors, eta0, eta1).total;
  };
  const Real jp = eval(tp, pi0 + h * delta_pi0);
  const Real jm = eval(tm, pi0 - h * delta_pi0);
  return (jp - jm) / (2.0 * h);
}

}  // namespace airest
