#include "airest/thermal.hpp"

#include <cmath>

namespace airest {

VecX trapezoid_weights(int n_steps, Real dt) {
  VecX w = VecX::Constant(n_steps + 1, dt);
  w[0] = 0.5 * dt;
  w[n_steps] = 0.5 * dt;
  return w;
}

ThermalOperator make_thermal_operator(const FemSpace& S, const FemSpace& V, const VecX& u,
                                      const VecX& kappa_elem, Real dt, bool adjoint) {
  if (!(dt > 0)) throw ValidationError("thermal operator: dt must be positive");
  ThermalOperator op;
  op.dt = dt;
  op.mass = assemble_mass(S);
  SpMat A = (1.0 / dt) * op.mass;
  A += assemble_diffusion(S, kappa_elem);
  const SpMat C = assemble_convection(S, V, u);
  if (adjoint)
    A -= C;
  else
    A += C;
  op.boundary = S.boundary_nodes();
  VecX dummy = VecX::Zero(S.n_dofs);
  apply_dirichlet_zero(A, dummy, op.boundary);
  op.step = std::move(A);
  try {
    op.lu.factorize(op.step);
  } catch (const SolverError& e) {
    throw SolverError(std::string("thermal step matrix is singular: ") + e.what());
  }
  return op;
}

VecX TemperatureTrajectory::times() const {
  VecX t(fields.size());
  for (int k = 0; k < t.size(); ++k) t[k] = k * dt;
  return t;
}

TemperatureTrajectory simulate_temperature(const VecX& pi0, const ThermalOperator& op,
                                           const HeatSource& g, Real horizon) {
  const Real steps_real = horizon / op.dt;
  const int n = static_cast<int>(std::lround(steps_real));
  if (std::abs(steps_real - n) > 1e-9 || n < 1)
    throw ValidationError("simulate_temperature: dt must divide the horizon");
  for (int d : op.boundary)
    if (pi0[d] != 0.0)
      throw ValidationError("simulate_temperature: pi0 must vanish on the boundary");

  TemperatureTrajectory traj;
  traj.dt = op.dt;
  traj.horizon = horizon;
  traj.pi0 = pi0;
  traj.fields.reserve(n + 1);
  traj.fields.push_back(pi0);
  const Real scale = std::max(1.0, pi0.norm());
  for (int k = 0; k < n; ++k) {
    VecX rhs = (1.0 / op.dt) * (op.mass * traj.fields.back());
    rhs += g.at((k + 1) * op.dt);
    for (int d : op.boundary) rhs[d] = 0.0;
    VecX next = op.lu.solve(rhs);
    const Real res = (op.step * next - rhs).norm();
    if (res > 1e-10 * std::max(scale, rhs.norm()))
      throw SolverError("simulate_temperature: step residual " + std::to_string(res));
    for (int d : op.boundary) next[d] = 0.0;
    traj.fields.push_back(std::move(next));
  }
  return traj;
}

std::vector<VecX> observation_vectors(const FloorPlan& plan, const FemSpace& S) {
  std::vector<VecX> phi;
  phi.reserve(plan.thermostats.size());
  for (const auto& th : plan.thermostats) {
    if (th.sigma <= 0)
      throw ValidationError("observation_vectors: bump weights not normalized for this mesh");
    phi.push_back(assemble_load(
        S, [&](const Vec2& x) { return bump_weight(th, x); }, 5));
  }
  return phi;
}

SensorRecord observe(const TemperatureTrajectory& traj, const std::vector<VecX>& phi,
                     std::vector<int> sensor_ids) {
  SensorRecord rec;
  const int nt = static_cast<int>(phi.size());
  const int levels = static_cast<int>(traj.fields.size());
  rec.times = traj.times();
  rec.y.resize(nt, levels);
  for (int i = 0; i < nt; ++i)
    for (int k = 0; k < levels; ++k) rec.y(i, k) = phi[i].dot(traj.fields[k]);
  rec.pi0_hat = rec.y.col(0);
  if (sensor_ids.empty()) {
    rec.sensor_ids.resize(nt);
    for (int i = 0; i < nt; ++i) rec.sensor_ids[i] = i;
  } else {
    if (static_cast<int>(sensor_ids.size()) != nt)
      throw ValidationError("observe: sensor id list does not match phi count");
    rec.sensor_ids = std::move(sensor_ids);
  }
  return rec;
}

CostBreakdown cost(const TemperatureTrajectory& traj, const VecX& pi0,
                   const SensorRecord& sensors, Real eta0, Real eta1,
                   const std::vector<VecX>& phi, const SpMat& mass) {
  const int levels = static_cast<int>(traj.fields.size());
  if (sensors.y.cols() != levels || sensors.times.size() != levels)
    throw ValidationError("cost: sensor record grid does not match trajectory grid");
  if (static_cast<int>(phi.size()) != sensors.y.rows())
    throw ValidationError("cost: observation vector count does not match sensor record");
  if (levels >= 2 && std::abs(sensors.times[1] - sensors.times[0] - traj.dt) > 1e-9)
    throw ValidationError("cost: sensor record time step does not match trajectory");

  CostBreakdown c;
  c.eta0 = eta0;
  c.eta1 = eta1;
  const VecX w = trapezoid_weights(traj.n_steps(), traj.dt);
  for (int i = 0; i < sensors.y.rows(); ++i) {
    for (int k = 0; k < levels; ++k) {
      const Real mismatch = phi[i].dot(traj.fields[k]) - sensors.y(i, k);
      c.tracking += w[k] * mismatch * mismatch;
    }
    const Real m0 = phi[i].dot(pi0) - sensors.pi0_hat[i];
    c.initial_match += eta0 * m0 * m0;
  }
  c.regularization = eta1 * pi0.dot(mass * pi0);
  c.total = c.tracking + c.initial_match + c.regularization;
  return c;
}

}  // namespace airest
