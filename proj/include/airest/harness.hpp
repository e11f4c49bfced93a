#pragma once

#include <string>
#include <vector>

#include "airest/scenario.hpp"

namespace airest {

/// One estimation run inside an experiment suite.
struct RunResult {
  std::string dataset;  // theta-config / pi0-field label
  std::string method;   // "G" (gradient) or "B" (baseline)
  int init_id = 0;
  bool ok = false;
  std::string error;

  VecX theta_hat;
  VecX per_door_err;
  Real e_theta = 0, e_pi0 = 0;
  Real final_cost = 0;
  int iterations = 0;
  int accepted_steps = 0;
  bool converged = false;
  std::string termination;
  SolveCounter solves;
  std::size_t peak_tracked_bytes = 0;
  std::size_t peak_rss_bytes = 0;
  Real wall_seconds = 0;

  // optimizer invariants observed over the run
  bool v_nonpositive = true;
  bool theta_in_box = true;
  bool cost_strictly_decreasing = true;
};

struct ExperimentReport {
  std::vector<RunResult> runs;
  Real mean_e_theta(const std::string& method) const;
  Real mean_e_pi0(const std::string& method) const;
};

/// Twin-recovery suite: every theta configuration x initial field x
/// multistart x method. Deterministic for a fixed scenario seed; runs are
/// distributed over `workers` threads with an index-ordered reduction.
ExperimentReport run_twin_suite(const Scenario& base,
                                const std::vector<VecX>& theta_configs,
                                const std::vector<std::string>& pi0_specs, int multistarts,
                                bool run_gradient, bool run_baseline, int workers);

/// Reads the experiment config JSON ({scenario, theta_configs, pi0_fields,
/// methods, multistarts, workers}) and writes report.csv / report.json /
/// plotdata under out_dir.
ExperimentReport run_experiment(const std::string& config_path, const std::string& out_dir,
                                int workers_override = 0);

/// Scaling study: restrict the plan to n_d = 1..max_doors doors (remaining
/// doors become walls or free air according to theta_star) and run both
/// methods for a few iterations, recording solve counts and memory.
struct ScalingRow {
  int n_doors = 0;
  int iterations_g = 0, iterations_b = 0;
  SolveCounter solves_g, solves_b;
  std::size_t peak_bytes_g = 0, peak_bytes_b = 0;
};
std::vector<ScalingRow> run_scaling(const Scenario& base, int max_doors, int iters);
void write_scaling_csv(const std::vector<ScalingRow>& rows, const std::string& path);

/// Plan with only the first `keep` doors; the rest are frozen at their truth
/// state (closed -> wall, open -> removed).
FloorPlan restrict_doors(const FloorPlan& plan, const VecX& theta_star, int keep);

/// Three-way derivative agreement (adjoint / tangent / finite differences)
/// on seeded random directions; writes a CSV row per direction. Returns true
/// when every direction meets the tolerances (5% adjoint-FD, 1% tangent-FD,
/// 2% adjoint-tangent). With `refine`, repeats on a half-h half-dt
/// discretization and also requires the mean adjoint-FD error to decrease.
struct GradCheckResult {
  bool pass = false;
  Real max_adj_fd = 0, max_tan_fd = 0, max_adj_tan = 0;
  Real mean_adj_fd = 0;
  Real refined_mean_adj_fd = -1;  // -1 when refine was off
};
GradCheckResult gradcheck(const Scenario& s, int n_directions, std::uint64_t seed,
                          const std::string& out_csv, bool refine);

/// Bisection on each vent's force magnitude until the solved mean speed over
/// the vent rectangle is within 5% of its target (doors open).
Scenario calibrate_vent_forces(Scenario s, int passes = 2);

/// Writes report.csv, report.json and plotdata/*.csv for a finished suite.
void write_report(const ExperimentReport& report, const std::string& out_dir);

/// Best-effort peak resident set size of this process, in bytes.
std::size_t peak_rss_bytes();

}  // namespace airest
