#include "airest/estimate.hpp"

#include <algorithm>
#include <cmath>

namespace airest {

namespace {

struct MemTracker {
  std::size_t peak = 0;
  void set(std::size_t bytes) { peak = std::max(peak, bytes); }
};

void clamp_box(VecX& v) {
  for (int i = 0; i < v.size(); ++i) v[i] = std::clamp(v[i], 0.0, 1.0);
}

std::size_t vec_bytes(const VecX& v) { return static_cast<std::size_t>(v.size()) * sizeof(Real); }

}  // namespace

DescentDirection descent_direction(const Model& model, const GradientBundle& grad,
                                   const VecX& theta, Real gamma) {
  if (!(gamma > 0)) throw ValidationError("descent_direction: gamma must be positive");
  if (theta.size() != grad.d_theta.size())
    throw ValidationError("descent_direction: theta dimension mismatch");
  DescentDirection dir;
  dir.delta_pi0 = -(1.0 / gamma) * grad.d_pi0;
  dir.delta_theta = VecX::Zero(theta.size());
  for (int i = 0; i < theta.size(); ++i)
    dir.delta_theta[i] = std::clamp(-grad.d_theta[i] / gamma, -theta[i], 1.0 - theta[i]);

  const VecX m_dpi = model.mass * dir.delta_pi0;
  dir.V = grad.d_pi0.dot(m_dpi) + 0.5 * gamma * dir.delta_pi0.dot(m_dpi) +
          grad.d_theta.dot(dir.delta_theta) + 0.5 * gamma * dir.delta_theta.squaredNorm();
  return dir;
}

int armijo(const std::function<Real(Real)>& trial_total, Real J0, Real V, Real alpha_bar,
           Real beta_bar, int j_max) {
  if (!(alpha_bar > 0 && alpha_bar < 1) || !(beta_bar > 0 && beta_bar < 1))
    throw ValidationError("armijo: alpha_bar and beta_bar must lie in (0,1)");
  if (!(V < 0)) throw ValidationError("armijo: requires a strict descent direction (V < 0)");
  Real beta = 1.0;
  for (int j = 0; j <= j_max; ++j) {
    if (trial_total(beta) - J0 <= alpha_bar * beta * V) return j;
    beta *= beta_bar;
  }
  throw SolverError("armijo: no step up to beta_bar^" + std::to_string(j_max) +
                    " satisfied the sufficient-decrease test");
}

EstimationState estimate(const EstimationProblem& pb, VecX pi0, VecX theta) {
  const Model& model = *pb.model;
  const SensorRecord& data = *pb.data;
  if (theta.size() != model.n_doors())
    throw ValidationError("estimate: init theta dimension mismatch");
  if (!DoorConfig{theta}.in_box(1e-12))
    throw ValidationError("estimate: init theta outside [0,1]");
  clamp_box(theta);
  for (int d : model.s_boundary) pi0[d] = 0.0;

  EstimationState st;
  MemTracker mem;

  FlowSolution flow = solve_flow(model.flow_problem(theta));
  st.solves.flow++;
  auto op = std::make_shared<ThermalOperator>(
      make_thermal_operator(model.S, model.V, flow.u, model.kappa_elem(theta), pb.dt));
  TemperatureTrajectory traj = solve_temperature(model, *op, pi0, pb.horizon);
  st.solves.thermal++;
  CostBreakdown J = eval_cost(model, traj, pi0, data, pb.eta0, pb.eta1);
  st.cost_history.push_back(J);

  const Real tol_eff = pb.opt.stop_tol * std::max(J.total, 1e-12);
  auto state_bytes = [&](const TemperatureTrajectory& tr, const ThermalOperator& o) {
    return tr.bytes() + o.bytes() + vec_bytes(flow.u) + vec_bytes(flow.p);
  };
  mem.set(state_bytes(traj, *op));

  for (int it = 1; it <= pb.opt.max_iter; ++it) {
    st.iterations = it;
    std::size_t adj_bytes = 0;
    const GradientBundle grad =
        adjoint_gradient(model, theta, pi0, flow, traj, data, pb.eta0, pb.eta1, &adj_bytes);
    st.solves.adjoint++;
    mem.set(state_bytes(traj, *op) + adj_bytes);

    const DescentDirection dir = descent_direction(model, grad, theta, pb.opt.gamma);
    st.V_history.push_back(dir.V);
    if (dir.V > 1e-10 * std::max(1.0, J.total))
      throw SolverError("estimate: QP value came out positive");
    if (std::abs(dir.V) <= tol_eff) {
      st.converged = true;
      st.termination = "V_below_tol";
      break;
    }

    const bool theta_moves =
        dir.delta_theta.size() > 0 && dir.delta_theta.lpNorm<Eigen::Infinity>() > 0;
    VecX theta_t, pi0_t;
    FlowSolution flow_t;
    std::shared_ptr<ThermalOperator> op_t;
    TemperatureTrajectory traj_t;
    CostBreakdown J_t;
    auto trial = [&](Real beta) {
      theta_t = theta + beta * dir.delta_theta;
      clamp_box(theta_t);
      pi0_t = pi0 + beta * dir.delta_pi0;
      if (theta_moves) {
        flow_t = solve_flow(model.flow_problem(theta_t), &flow);
        st.solves.flow++;
        op_t = std::make_shared<ThermalOperator>(
            make_thermal_operator(model.S, model.V, flow_t.u, model.kappa_elem(theta_t), pb.dt));
      } else {
        flow_t = flow;
        op_t = op;
      }
      traj_t = solve_temperature(model, *op_t, pi0_t, pb.horizon);
      st.solves.thermal++;
      J_t = eval_cost(model, traj_t, pi0_t, data, pb.eta0, pb.eta1);
      mem.set(state_bytes(traj_t, *op_t) + traj.bytes());
      return J_t.total;
    };

    try {
      armijo(trial, J.total, dir.V, pb.opt.alpha_bar, pb.opt.beta_bar, pb.opt.armijo_jmax);
    } catch (const SolverError&) {
      st.termination = "line_search_stall";
      break;
    }

    if (!(J_t.total < J.total))
      throw SolverError("estimate: accepted step did not decrease the cost");
    theta = theta_t;
    pi0 = pi0_t;
    flow = std::move(flow_t);
    op = op_t;
    traj = std::move(traj_t);
    J = J_t;
    st.cost_history.push_back(J);
    st.accepted_steps++;
    if (!DoorConfig{theta}.in_box(0.0))
      throw SolverError("estimate: theta left the unit box");
  }
  if (st.termination.empty()) st.termination = "max_iter";

  st.pi0 = std::move(pi0);
  st.theta = std::move(theta);
  st.peak_tracked_bytes = mem.peak;
  return st;
}

Real bernoulli_weight(const VecX& p, unsigned config) {
  Real w = 1.0;
  for (int i = 0; i < p.size(); ++i) w *= ((config >> i) & 1u) ? p[i] : (1.0 - p[i]);
  return w;
}

namespace {

// d P(config) / d p_i
Real bernoulli_dweight(const VecX& p, unsigned config, int i) {
  Real w = ((config >> i) & 1u) ? 1.0 : -1.0;
  for (int j = 0; j < p.size(); ++j) {
    if (j == i) continue;
    w *= ((config >> j) & 1u) ? p[j] : (1.0 - p[j]);
  }
  return w;
}

}  // namespace

BaselineState baseline_estimate(const EstimationProblem& pb, VecX p, VecX e_pi0, int max_iter) {
  const Model& model = *pb.model;
  const SensorRecord& data = *pb.data;
  const int nd = model.n_doors();
  if (p.size() != nd) throw ValidationError("baseline: init p dimension mismatch");
  if (!DoorConfig{p}.in_box(1e-12)) throw ValidationError("baseline: init p outside [0,1]");
  clamp_box(p);
  for (int d : model.s_boundary) e_pi0[d] = 0.0;

  const long n_cfg = 1L << nd;
  if (n_cfg > pb.opt.baseline_config_budget)
    throw ValidationError("baseline: 2^{n_d} = " + std::to_string(n_cfg) +
                          " exceeds the configured budget");

  const std::vector<VecX> phi = model.phi_subset(data.sensor_ids);
  const int ns = static_cast<int>(phi.size());
  const int n_steps = static_cast<int>(std::lround(pb.horizon / pb.dt));
  const int levels = n_steps + 1;
  const VecX w = trapezoid_weights(n_steps, pb.dt);

  BaselineState st;
  MemTracker mem;

  struct ConfigCache {
    VecX u;
    std::shared_ptr<ThermalOperator> op, adj_op;
  };
  std::vector<ConfigCache> cfg(n_cfg);
  std::size_t cache_bytes = 0;
  for (long c = 0; c < n_cfg; ++c) {
    VecX th(nd);
    for (int i = 0; i < nd; ++i) th[i] = static_cast<Real>((c >> i) & 1);
    const FlowSolution fl = solve_flow(model.flow_problem(th));
    st.solves.flow++;
    cfg[c].u = fl.u;
    const VecX kap = model.kappa_elem(th);
    cfg[c].op = std::make_shared<ThermalOperator>(
        make_thermal_operator(model.S, model.V, fl.u, kap, pb.dt, false));
    cfg[c].adj_op = std::make_shared<ThermalOperator>(
        make_thermal_operator(model.S, model.V, fl.u, kap, pb.dt, true));
    cache_bytes += vec_bytes(cfg[c].u) + cfg[c].op->bytes() + cfg[c].adj_op->bytes();
  }
  mem.set(cache_bytes);

  auto series_cost = [&](const Eigen::MatrixXd& ybar, const VecX& field) {
    Real tr = 0;
    for (int s = 0; s < ns; ++s)
      for (int k = 0; k < levels; ++k) {
        const Real m = ybar(s, k) - data.y(s, k);
        tr += w[k] * m * m;
      }
    Real im = 0;
    for (int s = 0; s < ns; ++s) {
      const Real m0 = phi[s].dot(field) - data.pi0_hat[s];
      im += pb.eta0 * m0 * m0;
    }
    return tr + im + pb.eta1 * field.dot(model.mass * field);
  };

  Real tol_eff = -1;
  for (int it = 1; it <= max_iter; ++it) {
    st.iterations = it;

    // one forward solve per binary configuration at the current mean field
    std::vector<Eigen::MatrixXd> yc(n_cfg);
    std::size_t sweep_bytes = 0;
    for (long c = 0; c < n_cfg; ++c) {
      const TemperatureTrajectory traj = solve_temperature(model, *cfg[c].op, e_pi0, pb.horizon);
      st.solves.thermal++;
      sweep_bytes += traj.bytes();
      yc[c].resize(ns, levels);
      for (int s = 0; s < ns; ++s)
        for (int k = 0; k < levels; ++k) yc[c](s, k) = phi[s].dot(traj.fields[k]);
    }
    mem.set(cache_bytes + sweep_bytes);

    VecX pw(n_cfg);
    for (long c = 0; c < n_cfg; ++c) pw[c] = bernoulli_weight(p, static_cast<unsigned>(c));
    Eigen::MatrixXd ybar = Eigen::MatrixXd::Zero(ns, levels);
    for (long c = 0; c < n_cfg; ++c) ybar += pw[c] * yc[c];

    const Real Jbar = series_cost(ybar, e_pi0);
    st.cost_history.push_back(Jbar);
    if (tol_eff < 0) tol_eff = pb.opt.stop_tol * std::max(Jbar, 1e-12);

    // expected-mismatch source, common to every configuration
    std::vector<VecX> sources(levels);
    for (int k = 0; k < levels; ++k) {
      VecX s = VecX::Zero(model.S.n_dofs);
      for (int i = 0; i < ns; ++i) s += 2.0 * (ybar(i, k) - data.y(i, k)) * phi[i];
      sources[k] = std::move(s);
    }
    // probability-weighted adjoint passes give the mean-field gradient
    VecX lam6_mix = VecX::Zero(model.S.n_dofs);
    for (long c = 0; c < n_cfg; ++c) {
      const std::vector<VecX> lam = adjoint_backward(*cfg[c].adj_op, sources);
      st.solves.adjoint++;
      lam6_mix += pw[c] * lam[0];
    }
    VecX dual = model.mass * (2.0 * pb.eta1 * e_pi0 - lam6_mix);
    for (int s = 0; s < ns; ++s)
      dual += 2.0 * pb.eta0 * (phi[s].dot(e_pi0) - data.pi0_hat[s]) * phi[s];
    const VecX d_field = model.riesz_interior(std::move(dual));

    // analytic gradient with respect to the Bernoulli parameters
    VecX gp = VecX::Zero(nd);
    for (int i = 0; i < nd; ++i) {
      Eigen::MatrixXd dy = Eigen::MatrixXd::Zero(ns, levels);
      for (long c = 0; c < n_cfg; ++c)
        dy += bernoulli_dweight(p, static_cast<unsigned>(c), i) * yc[c];
      Real acc = 0;
      for (int s = 0; s < ns; ++s)
        for (int k = 0; k < levels; ++k)
          acc += w[k] * 2.0 * (ybar(s, k) - data.y(s, k)) * dy(s, k);
      gp[i] = acc;
    }

    // projected QP direction, same proximal form as the gradient method
    const Real gamma = pb.opt.gamma;
    VecX d_dir = -(1.0 / gamma) * d_field;
    VecX dp(nd);
    for (int i = 0; i < nd; ++i) dp[i] = std::clamp(-gp[i] / gamma, -p[i], 1.0 - p[i]);
    const VecX md = model.mass * d_dir;
    const Real V = d_field.dot(md) + 0.5 * gamma * d_dir.dot(md) + gp.dot(dp) +
                   0.5 * gamma * dp.squaredNorm();
    st.V_history.push_back(V);
    if (std::abs(V) <= tol_eff) {
      st.converged = true;
      st.termination = "V_below_tol";
      break;
    }

    // homogeneous responses along d_dir: lets every line-search trial be
    // evaluated in closed form (trajectories are affine in the initial field)
    std::vector<Eigen::MatrixXd> zc(n_cfg);
    for (long c = 0; c < n_cfg; ++c) {
      const TemperatureTrajectory z = simulate_temperature(
          d_dir, *cfg[c].op, HeatSource::zero(model.S.n_dofs), pb.horizon);
      st.solves.tangent++;
      zc[c].resize(ns, levels);
      for (int s = 0; s < ns; ++s)
        for (int k = 0; k < levels; ++k) zc[c](s, k) = phi[s].dot(z.fields[k]);
    }

    VecX p_t, e_t;
    auto trial = [&](Real beta) {
      p_t = p + beta * dp;
      clamp_box(p_t);
      e_t = e_pi0 + beta * d_dir;
      Eigen::MatrixXd yt = Eigen::MatrixXd::Zero(ns, levels);
      for (long c = 0; c < n_cfg; ++c)
        yt += bernoulli_weight(p_t, static_cast<unsigned>(c)) * (yc[c] + beta * zc[c]);
      return series_cost(yt, e_t);
    };
    try {
      armijo(trial, Jbar, V, pb.opt.alpha_bar, pb.opt.beta_bar, pb.opt.armijo_jmax);
    } catch (const SolverError&) {
      st.termination = "line_search_stall";
      break;
    }
    p = p_t;
    e_pi0 = e_t;
    st.accepted_steps++;
  }
  if (st.termination.empty()) st.termination = "max_iter";

  st.p = std::move(p);
  st.e_pi0 = std::move(e_pi0);
  st.peak_tracked_bytes = mem.peak;
  return st;
}

std::pair<Real, Real> error_metrics(const VecX& theta_true, const VecX& theta_hat,
                                    const VecX& pi0_true, const VecX& pi0_hat,
                                    const SpMat& mass, bool* absolute_pi0_norm) {
  if (theta_true.size() != theta_hat.size())
    throw ValidationError("error_metrics: theta dimension mismatch");
  if (pi0_true.size() != pi0_hat.size())
    throw ValidationError("error_metrics: pi0 dimension mismatch");
  Real e_theta = 0;
  if (theta_true.size() > 0)
    e_theta = (theta_true - theta_hat).cwiseAbs().sum() / theta_true.size();
  const VecX d = pi0_true - pi0_hat;
  const Real err = std::sqrt(d.dot(mass * d));
  const Real ref = std::sqrt(pi0_true.dot(mass * pi0_true));
  if (ref > 1e-14) {
    if (absolute_pi0_norm) *absolute_pi0_norm = false;
    return {e_theta, err / ref};
  }
  if (absolute_pi0_norm) *absolute_pi0_norm = true;
  return {e_theta, err};
}

}  // namespace airest
