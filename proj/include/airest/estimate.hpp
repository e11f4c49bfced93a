#pragma once

#include <functional>
#include <string>

#include "airest/adjoint.hpp"
#include "airest/model.hpp"

namespace airest {

struct SolveCounter {
  long flow = 0;     // nonlinear stationary flow solves
  long thermal = 0;  // forward temperature trajectory solves
  long adjoint = 0;  // adjoint passes (temperature backward + flow)
  long tangent = 0;  // linearized (homogeneous) trajectory solves
};

struct EstimatorSettings {
  Real gamma = 1.0;
  Real alpha_bar = 0.01;
  Real beta_bar = 0.7;
  Real stop_tol = 1e-8;  // on |V|, relative to the initial cost scale
  int max_iter = 60;
  int armijo_jmax = 40;
  int baseline_config_budget = 1024;  // guard on 2^{n_d}
};

struct EstimationProblem {
  const Model* model = nullptr;
  const SensorRecord* data = nullptr;
  Real horizon = 300, dt = 10;
  Real eta0 = 1.0, eta1 = 0.1;
  EstimatorSettings opt;
};

/// Solution of the box-constrained proximal QP (closed form, separable).
struct DescentDirection {
  VecX delta_pi0, delta_theta;
  Real V = 0;  // QP value, always <= 0
};

DescentDirection descent_direction(const Model& model, const GradientBundle& grad,
                                   const VecX& theta, Real gamma);

/// Backtracking line search: smallest j with
/// trial(beta_bar^j) - J0 <= alpha_bar * beta_bar^j * V. Requires V < 0.
/// Throws SolverError when no j <= j_max satisfies the test.
int armijo(const std::function<Real(Real)>& trial_total, Real J0, Real V, Real alpha_bar,
           Real beta_bar, int j_max);

struct EstimationState {
  VecX pi0, theta;
  std::vector<CostBreakdown> cost_history;  // one entry per visited iterate
  std::vector<Real> V_history;              // one entry per gradient evaluation
  int iterations = 0;
  int accepted_steps = 0;
  SolveCounter solves;
  bool converged = false;
  std::string termination;
  std::size_t peak_tracked_bytes = 0;
};

/// Projected-gradient estimation: forward solve, adjoint pass, QP direction,
/// Armijo step, until |V| falls below tolerance. The flow is re-solved only
/// when theta changes. Cost is strictly decreasing across accepted steps.
EstimationState estimate(const EstimationProblem& pb, VecX init_pi0, VecX init_theta);

struct BaselineState {
  VecX p;       // per-door Bernoulli parameters in [0,1]
  VecX e_pi0;   // estimated mean initial temperature field
  std::vector<Real> cost_history;
  std::vector<Real> V_history;
  int iterations = 0;
  int accepted_steps = 0;
  SolveCounter solves;
  bool converged = false;
  std::string termination;
  std::size_t peak_tracked_bytes = 0;
};

/// Probabilistic estimation over a product-Bernoulli door distribution: each
/// outer iteration runs one forward temperature solve per binary
/// configuration (2^{n_d} of them) at the current mean field, then takes a
/// projected-gradient step on (E[pi0], p). Line-search trials are evaluated
/// in closed form from the cached per-configuration responses.
BaselineState baseline_estimate(const EstimationProblem& pb, VecX init_p, VecX init_e_pi0,
                                int max_iter);

/// Probability of a binary configuration under the product-Bernoulli model.
Real bernoulli_weight(const VecX& p, unsigned config);

/// e_theta = mean |theta_i - theta_hat_i|; e_pi0 = ||pi0 - pi0_hat||/||pi0||
/// in the mesh L2 norm. When ||pi0|| = 0 the absolute norm is returned and
/// *absolute_pi0_norm set.
std::pair<Real, Real> error_metrics(const VecX& theta_true, const VecX& theta_hat,
                                    const VecX& pi0_true, const VecX& pi0_hat,
                                    const SpMat& mass, bool* absolute_pi0_norm = nullptr);

}  // namespace airest
