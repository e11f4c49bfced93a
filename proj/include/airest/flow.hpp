#pragma once

#include <memory>
#include <vector>

#include "airest/fem.hpp"

namespace airest {

/// Stationary penalized Navier-Stokes problem on Taylor-Hood spaces.
/// `laplacian` and `divergence` are unscaled and shared across theta values.
struct FlowProblem {
  const FemSpace* V = nullptr;  // P2 vector velocity
  const FemSpace* P = nullptr;  // P1 pressure
  std::shared_ptr<const SpMat> laplacian;   // (grad u : grad v)
  std::shared_ptr<const SpMat> divergence;  // (div u, q)
  VecX alpha_elem;                          // Brinkman coefficient per element
  VecX g_force;                             // assembled (g_u, v)
  Real Re = 100.0;
  std::vector<int> wall_dofs;               // velocity dofs on Gamma_w
  int pressure_pin = -1;                    // dof pinned to 0 when Gamma_i is empty
  VecX theta;                               // bookkeeping
};

/// Velocity-pressure pair solving the problem; u vanishes on Gamma_w dofs.
struct FlowSolution {
  VecX u, p;
  VecX theta_used;
  Real residual_norm = 0.0;
  int newton_iterations = 0;
};

/// Builds spaces-dependent pieces (call once per mesh, reuse across theta).
FlowProblem make_flow_problem(const FemSpace& V, const FemSpace& P, Real Re,
                              VecX alpha_elem, VecX g_force, bool has_inlet);

/// Damped Newton from a Stokes (or warm) start; falls back to Reynolds
/// continuation before giving up. Residual tolerance 1e-9 absolute.
FlowSolution solve_flow(const FlowProblem& problem, const FlowSolution* warm = nullptr);

/// Solves the problem at each Reynolds number in turn, warm-starting from the
/// previous solution. `steps` must be increasing and end at problem.Re.
FlowSolution reynolds_continuation(const FlowProblem& problem, const std::vector<Real>& steps);

/// Euclidean norm of the weak divergence constraint residual (div u, q_i).
Real divergence_norm(const FlowProblem& problem, const FlowSolution& flow);

/// [A  g*D^T; D  0] block matrix (g = -1 forward, +1 adjoint convention).
SpMat saddle_matrix(const SpMat& A, const SpMat& D, Real grad_sign);

/// Mean of |u| over the elements whose centroid lies in the rectangle.
Real mean_speed(const FemSpace& V, const VecX& u, const Rect& region);

}  // namespace airest
