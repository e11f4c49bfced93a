#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

#include "airest/fem.hpp"
#include "airest/flow.hpp"

namespace airest {

/// Heat source as a load vector per time (constant or time-dependent).
class HeatSource {
 public:
  static HeatSource constant(VecX load) {
    HeatSource s;
    s.load_ = std::move(load);
    return s;
  }
  static HeatSource time_dependent(std::function<VecX(Real)> fn) {
    HeatSource s;
    s.fn_ = std::move(fn);
    return s;
  }
  static HeatSource zero(int n) { return constant(VecX::Zero(n)); }

  VecX at(Real t) const { return fn_ ? fn_(t) : load_; }

 private:
  VecX load_;
  std::function<VecX(Real)> fn_;
};

/// Factorized implicit-Euler step operator for fixed transport field and
/// diffusivity: A = M/dt + K(kappa) + C(u), homogeneous Dirichlet rows.
/// With `adjoint` the convection sign flips (A = M/dt + K - C), which is the
/// backward-in-time operator of the adjoint temperature equation.
struct ThermalOperator {
  SpMat mass;       // unconstrained P1 mass
  SpMat step;       // constrained step matrix
  SparseFactor lu;
  std::vector<int> boundary;  // P1 boundary nodes
  Real dt = 0;
  std::size_t bytes() const { return lu.factor_bytes() + 16 * (mass.nonZeros() + step.nonZeros()); }
};

ThermalOperator make_thermal_operator(const FemSpace& S, const FemSpace& V, const VecX& u,
                                      const VecX& kappa_elem, Real dt, bool adjoint = false);

/// Time-indexed temperature fields (deviation from the boundary temperature).
struct TemperatureTrajectory {
  Real dt = 0, horizon = 0;
  std::vector<VecX> fields;  // N+1 entries, fields[0] == pi0
  VecX pi0;
  const FlowSolution* flow_used = nullptr;  // non-owning

  int n_steps() const { return static_cast<int>(fields.size()) - 1; }
  VecX times() const;
  std::size_t bytes() const {
    return fields.empty() ? 0 : fields.size() * fields[0].size() * sizeof(Real);
  }
};

/// Implicit Euler integration of the temperature equation from pi0.
/// pi0 must vanish on boundary dofs; dt must divide the horizon.
TemperatureTrajectory simulate_temperature(const VecX& pi0, const ThermalOperator& op,
                                           const HeatSource& g, Real horizon);

/// Thermostat readings over a trajectory plus the derived initial values.
struct SensorRecord {
  VecX times;
  Eigen::MatrixXd y;            // n_sensors x (N+1)
  VecX pi0_hat;                 // y.col(0)
  std::vector<int> sensor_ids;  // indices into the plan's thermostat list
  std::uint64_t manifest = 0;   // binds twin data to the generating scenario
};

/// Load vector of each thermostat bump on the P1 space (requires normalized
/// sigmas).
std::vector<VecX> observation_vectors(const FloorPlan& plan, const FemSpace& S);

SensorRecord observe(const TemperatureTrajectory& traj, const std::vector<VecX>& phi,
                     std::vector<int> sensor_ids = {});

struct CostBreakdown {
  Real tracking = 0, initial_match = 0, regularization = 0, total = 0;
  Real eta0 = 0, eta1 = 0;
};

/// Eq-style quadratic misfit: trapezoidal tracking integral over the sensor
/// series, initial-reading match weighted by eta0, L2 regularization of pi0
/// weighted by eta1.
CostBreakdown cost(const TemperatureTrajectory& traj, const VecX& pi0,
                   const SensorRecord& sensors, Real eta0, Real eta1,
                   const std::vector<VecX>& phi, const SpMat& mass);

/// Trapezoid weights dt*(1/2,1,...,1,1/2) for a uniform grid with n+1 levels.
VecX trapezoid_weights(int n_steps, Real dt);

}  // namespace airest
