#include "airest/model.hpp"

namespace airest {

Model Model::build(FloorPlan plan_in, const MaterialParams& params, Real target_h,
                   Real heat_scale) {
  plan_in.validate();
  params.validate();
  Model m;
  m.params = params;
  m.mesh_h = target_h;
  m.heat_scale = heat_scale;
  m.mesh = generate_mesh(plan_in, target_h);
  m.plan = normalize_bumps(plan_in, m.mesh);
  m.S = FemSpace(m.mesh, SpaceKind::P1Scalar);
  m.V = FemSpace(m.mesh, SpaceKind::P2Vector);
  m.P = FemSpace(m.mesh, SpaceKind::P1Pressure);

  m.mass = assemble_mass(m.S);
  m.s_boundary = m.S.boundary_nodes();
  {
    SpMat Mi = m.mass;
    VecX b = VecX::Zero(m.S.n_dofs);
    apply_dirichlet(Mi, b, m.s_boundary, VecX::Zero(static_cast<int>(m.s_boundary.size())),
                    true);
    m.mass_interior.factorize(Mi);
  }
  m.phi = observation_vectors(m.plan, m.S);

  m.door_elems.resize(m.plan.n_doors());
  for (int t = 0; t < m.mesh.n_triangles(); ++t) {
    const Vec2 c = m.mesh.centroid(t);
    for (int i = 0; i < m.plan.n_doors(); ++i)
      if (m.plan.doors[i].rect.contains(c)) m.door_elems[i].push_back(t);
  }
  for (int i = 0; i < m.plan.n_doors(); ++i)
    if (m.door_elems[i].empty())
      throw ValidationError("door " + std::to_string(i + 1) + " covers no mesh elements");

  m.laplacian = std::make_shared<SpMat>(assemble_vector_laplacian(m.V, 1.0));
  m.divergence = std::make_shared<SpMat>(assemble_divergence(m.V, m.P));
  m.wall_dofs = m.V.node_dofs(m.V.boundary_nodes(BoundaryTag::Wall));
  m.all_velocity_bdofs = m.V.node_dofs(m.V.boundary_nodes());
  m.has_inlet = !m.plan.inlets.empty();

  std::vector<Vec2> g(m.mesh.n_triangles(), Vec2::Zero());
  VecX q = VecX::Zero(m.mesh.n_triangles());
  for (int t = 0; t < m.mesh.n_triangles(); ++t) {
    const Vec2 c = m.mesh.centroid(t);
    for (const auto& vent : m.plan.vents) {
      if (!vent.rect.contains(c)) continue;
      g[t] += vent.force_magnitude * vent.direction;
      q[t] += vent.heat_rate * heat_scale;
    }
  }
  m.force_load = assemble_vector_load_per_element(m.V, g);
  m.heat_load = assemble_load_per_element(m.S, q);
  return m;
}

VecX Model::alpha_elem(const VecX& theta) const {
  const MaterialFieldFn f(plan, params, DoorConfig{theta});
  return sample_per_element(mesh, [&](const Vec2& x) { return f.alpha(x); });
}

VecX Model::kappa_elem(const VecX& theta) const {
  const MaterialFieldFn f(plan, params, DoorConfig{theta});
  return sample_per_element(mesh, [&](const Vec2& x) { return f.kappa(x); });
}

FlowProblem Model::flow_problem(const VecX& theta) const {
  FlowProblem pb;
  pb.V = &V;
  pb.P = &P;
  pb.laplacian = laplacian;
  pb.divergence = divergence;
  pb.alpha_elem = alpha_elem(theta);
  pb.g_force = force_load;
  pb.Re = params.Re;
  pb.wall_dofs = wall_dofs;
  pb.pressure_pin = has_inlet ? -1 : 0;
  pb.theta = theta;
  return pb;
}

std::vector<VecX> Model::phi_subset(const std::vector<int>& sensor_ids) const {
  std::vector<VecX> out;
  out.reserve(sensor_ids.size());
  for (int id : sensor_ids) {
    if (id < 0 || id >= static_cast<int>(phi.size()))
      throw ValidationError("sensor id out of range");
    out.push_back(phi[id]);
  }
  return out;
}

VecX Model::riesz_interior(VecX dual) const {
  for (int d : s_boundary) dual[d] = 0.0;
  VecX r = mass_interior.solve(dual);
  for (int d : s_boundary) r[d] = 0.0;
  return r;
}

ForwardResult solve_forward(const Model& model, const VecX& theta, const VecX& pi0,
                            Real horizon, Real dt, const FlowSolution* warm) {
  ForwardResult out;
  out.flow = solve_flow(model.flow_problem(theta), warm);
  const ThermalOperator op =
      make_thermal_operator(model.S, model.V, out.flow.u, model.kappa_elem(theta), dt);
  out.traj = simulate_temperature(pi0, op, HeatSource::constant(model.heat_load), horizon);
  out.traj.flow_used = nullptr;  // flow lives next to the trajectory in this bundle
  return out;
}

TemperatureTrajectory solve_temperature(const Model& model, const ThermalOperator& op,
                                        const VecX& pi0, Real horizon) {
  return simulate_temperature(pi0, op, HeatSource::constant(model.heat_load), horizon);
}

CostBreakdown eval_cost(const Model& model, const TemperatureTrajectory& traj, const VecX& pi0,
                        const SensorRecord& sensors, Real eta0, Real eta1) {
  return cost(traj, pi0, sensors, eta0, eta1, model.phi_subset(sensors.sensor_ids), model.mass);
}

}  // namespace airest
