#pragma once

#include "airest/model.hpp"

namespace airest {

/// Adjoint temperature trajectory (backward in time) and its t=0 slice.
struct AdjointTemperature {
  std::vector<VecX> lambda1;  // N+1 fields, lambda1[N] == 0
  VecX lambda6;               // == lambda1[0]
};

/// Adjoint velocity-pressure pair.
struct AdjointFlow {
  VecX lambda2, lambda3;
  std::size_t factor_bytes = 0;  // saddle factorization size (accounting)
};

struct AdjointSolution {
  AdjointTemperature temperature;
  AdjointFlow flow;
};

/// Per-element integrals of the Frechet derivative densities: ready to pair
/// with element-aligned indicator perturbations.
struct FrechetFields {
  VecX d_alpha_elem;  // int_e  lambda2 . u
  VecX d_kappa_elem;  // int_e  int_0^T grad lambda1 . grad T_e dt
};

/// Gradient of the cost with respect to (pi0, theta).
struct GradientBundle {
  VecX d_pi0;    // Riesz representative in the zero-trace P1 subspace
  VecX d_theta;  // one entry per door
  FrechetFields fields;
};

/// Core backward march shared with the probabilistic baseline: from
/// lambda(T) = 0, each implicit Euler step subtracts the trapezoid-split
/// source 0.5 (S^k + S^{k+1}); sources are dual vectors per time level.
std::vector<VecX> adjoint_backward(const ThermalOperator& adjoint_op,
                                   const std::vector<VecX>& sources);

/// Backward implicit Euler from lambda1(T)=0 with the sensor-mismatch source
/// applied through trapezoid-consistent step weights; homogeneous Dirichlet.
AdjointTemperature solve_adjoint_temperature(const Model& model,
                                             const TemperatureTrajectory& traj,
                                             const SensorRecord& sensors,
                                             const ThermalOperator& adjoint_op);

/// Linear adjoint Navier-Stokes solve with forcing -int_0^T lambda1 grad T_e dt,
/// lambda2 = 0 on the whole boundary, lambda3 gauge pinned.
AdjointFlow solve_adjoint_flow(const Model& model, const std::vector<VecX>& lambda1,
                               const TemperatureTrajectory& traj, const FlowSolution& flow,
                               const VecX& theta);

FrechetFields frechet_fields(const Model& model, const std::vector<VecX>& lambda1,
                             const VecX& lambda2, const TemperatureTrajectory& traj,
                             const FlowSolution& flow);

GradientBundle gradient(const Model& model, const VecX& lambda6, const FrechetFields& fields,
                        const VecX& pi0, const SensorRecord& sensors, Real eta0, Real eta1);

/// Full adjoint pass: adjoint temperature, adjoint flow, Frechet assembly.
/// `transient_bytes`, when given, receives the working-set size of the pass.
GradientBundle adjoint_gradient(const Model& model, const VecX& theta, const VecX& pi0,
                                const FlowSolution& flow, const TemperatureTrajectory& traj,
                                const SensorRecord& sensors, Real eta0, Real eta1,
                                std::size_t* transient_bytes = nullptr);

/// Exact linearization of the discrete forward map along (delta_pi0,
/// delta_theta); dJ is the directional derivative of the discrete cost.
struct TangentSolution {
  VecX delta_u, delta_p;
  std::vector<VecX> delta_Te;
  Real dJ = 0;
};

TangentSolution tangent_solve(const Model& model, const VecX& theta, const VecX& pi0,
                              const FlowSolution& flow, const TemperatureTrajectory& traj,
                              const SensorRecord& sensors, const VecX& delta_pi0,
                              const VecX& delta_theta, Real eta0, Real eta1);

/// Central finite difference of the full nonlinear cost along a direction.
Real fd_directional(const Model& model, const VecX& theta, const VecX& pi0,
                    const SensorRecord& sensors, const VecX& delta_pi0, const VecX& delta_theta,
                    Real h, Real eta0, Real eta1, Real horizon, Real dt);

}  // namespace airest
