#pragma once

#include <cstdint>
#include <string>

#include "airest/estimate.hpp"
#include "airest/model.hpp"

namespace airest {

/// Everything needed to reproduce one experiment: plan, constants, horizon,
/// twin truth, sensor subset and estimator settings. The seed fixes all
/// randomness derived from the scenario.
struct Scenario {
  std::string name;
  std::string plan_path;
  FloorPlan plan;
  MaterialParams params;
  Real mesh_h = 0.45;
  Real paper_mesh_h = 0.30;
  Real heat_scale = 2e-3;
  Real horizon = 300.0, dt = 10.0;
  Real eta0 = 1.0, eta1 = 0.1;
  VecX theta_star;
  std::string pi0_spec;          // JSON text describing the true initial field
  std::vector<int> sensor_ids;   // empty means every thermostat
  Real noise = 0.0;
  EstimatorSettings est;
  int multistarts = 5;
  std::uint64_t seed = 1;
};

Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& json_text, const std::string& base_dir);

Model build_model(const Scenario& s, Real h_override = 0.0);

/// Synthetic initial temperature field (P1 nodal values, zero trace).
/// Spec types: {"type":"zero"}, {"type":"bumps","bumps":[{center,amplitude,
/// sigma}...]}, {"type":"rooms","regions":[{rect,value}...]}; both carry an
/// optional "taper" width pulling the field to zero at the exterior walls.
VecX make_pi0_field(const Model& model, const std::string& spec_json);

std::vector<int> scenario_sensor_ids(const Scenario& s);

/// Hash binding generated data to the scenario that produced it.
std::uint64_t scenario_manifest(const Scenario& s, Real mesh_h_used);

/// Forward-solves the twin truth and observes it with the configured sensor
/// subset; adds seeded Gaussian noise when configured. The record carries the
/// scenario manifest.
SensorRecord generate_twin_data(const Model& model, const Scenario& s);

/// Hard error when a record's manifest does not match the scenario.
void require_manifest_match(const SensorRecord& rec, const Scenario& s, Real mesh_h_used);

EstimationProblem make_problem(const Model& model, const SensorRecord& data, const Scenario& s);

/// splitmix64: deterministic per-run seeds derived from the scenario seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace airest
