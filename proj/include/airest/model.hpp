#pragma once

#include <memory>
#include <vector>

#include "airest/fem.hpp"
#include "airest/floorplan.hpp"
#include "airest/flow.hpp"
#include "airest/mesh.hpp"
#include "airest/thermal.hpp"

namespace airest {

/// Discretized building: plan (with normalized bumps), mesh, spaces and all
/// theta-independent assembled pieces. Immutable; share freely across threads.
class Model {
 public:
  FloorPlan plan;
  MaterialParams params;
  Real mesh_h = 0;
  Mesh mesh;
  FemSpace S;  // P1 temperature (and adjoint temperature)
  FemSpace V;  // P2 velocity
  FemSpace P;  // P1 pressure

  SpMat mass;                    // P1 mass, unconstrained
  SparseFactor mass_interior;    // mass with boundary rows/cols eliminated
  std::vector<int> s_boundary;   // P1 boundary nodes
  std::vector<VecX> phi;         // observation vectors, one per thermostat
  std::vector<std::vector<int>> door_elems;  // elements covered by each door

  std::shared_ptr<const SpMat> laplacian;   // unscaled (grad u : grad v)
  std::shared_ptr<const SpMat> divergence;  // (div u, q)
  std::vector<int> wall_dofs;               // velocity dofs on Gamma_w
  std::vector<int> all_velocity_bdofs;      // velocity dofs on the whole boundary
  bool has_inlet = false;

  VecX force_load;  // (g_u, v) from the vents
  VecX heat_load;   // (g_Te, w) from the vents (heat_scale applied)
  Real heat_scale = 0;

  static Model build(FloorPlan plan, const MaterialParams& params, Real target_h,
                     Real heat_scale);

  VecX alpha_elem(const VecX& theta) const;
  VecX kappa_elem(const VecX& theta) const;
  FlowProblem flow_problem(const VecX& theta) const;

  /// phi vectors for the sensors named in a record.
  std::vector<VecX> phi_subset(const std::vector<int>& sensor_ids) const;

  /// sqrt(v^T M v).
  Real l2_norm(const VecX& v) const { return std::sqrt(v.dot(mass * v)); }

  /// Riesz representative of a dual vector in the zero-trace subspace:
  /// solves M d = dual on interior dofs, zero on the boundary.
  VecX riesz_interior(VecX dual) const;

  int n_doors() const { return plan.n_doors(); }
};

/// One full forward evaluation at (theta, pi0).
struct ForwardResult {
  FlowSolution flow;
  TemperatureTrajectory traj;
};

ForwardResult solve_forward(const Model& model, const VecX& theta, const VecX& pi0,
                            Real horizon, Real dt, const FlowSolution* warm = nullptr);

/// Trajectory only, reusing a solved flow and a factorized step operator.
TemperatureTrajectory solve_temperature(const Model& model, const ThermalOperator& op,
                                        const VecX& pi0, Real horizon);

CostBreakdown eval_cost(const Model& model, const TemperatureTrajectory& traj, const VecX& pi0,
                        const SensorRecord& sensors, Real eta0, Real eta1);

}  // namespace airest
