#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "airest/harness.hpp"
#include "airest/io.hpp"

using namespace airest;

namespace {

Real pick_h(const Scenario& s, Real mesh_h_flag, bool paper_scale) {
  if (mesh_h_flag > 0) return mesh_h_flag;
  if (paper_scale) return s.paper_mesh_h;
  return s.mesh_h;
}

VecX parse_theta(const std::string& text, int n) {
  VecX v(n);
  std::stringstream ss(text);
  std::string tok;
  int i = 0;
  while (std::getline(ss, tok, ',') && i < n) v[i++] = std::stod(tok);
  if (i != n) throw ValidationError("expected " + std::to_string(n) + " theta components");
  return v;
}

void write_result_json(const std::string& path, const VecX& theta_hat, Real e_theta, Real e_pi0,
                       int iterations, const std::vector<Real>& cost_history,
                       const std::vector<Real>& V_history, const SolveCounter& solves,
                       std::size_t peak_bytes, bool converged, const std::string& termination) {
  std::ostringstream os;
  os.precision(12);
  os << "{\n  \"theta_hat\": [";
  for (int i = 0; i < theta_hat.size(); ++i) os << (i ? ", " : "") << theta_hat[i];
  os << "],\n  \"e_theta\": " << e_theta << ",\n  \"e_pi0\": " << e_pi0
     << ",\n  \"iterations\": " << iterations << ",\n  \"converged\": "
     << (converged ? "true" : "false") << ",\n  \"termination\": \"" << termination
     << "\",\n  \"cost_history\": [";
  for (std::size_t i = 0; i < cost_history.size(); ++i) os << (i ? ", " : "") << cost_history[i];
  os << "],\n  \"V_history\": [";
  for (std::size_t i = 0; i < V_history.size(); ++i) os << (i ? ", " : "") << V_history[i];
  os << "],\n  \"solve_counts\": {\"flow\": " << solves.flow << ", \"thermal\": " << solves.thermal
     << ", \"adjoint\": " << solves.adjoint << ", \"tangent\": " << solves.tangent
     << "},\n  \"peak_memory_bytes\": " << peak_bytes
     << ",\n  \"peak_rss_bytes\": " << peak_rss_bytes() << "\n}\n";
  write_text_file(path, os.str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Building door-configuration and initial-temperature estimation"};
  app.require_subcommand(1);

  std::string plan_path, config_path, out_dir = ".", data_path, out_file;
  Real mesh_h = 0;
  bool paper_scale = false;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    if (needs_config)
      cmd->add_option("--config", config_path, "scenario JSON")->required();
    cmd->add_option("--out-dir", out_dir, "output directory");
    cmd->add_option("--mesh-h", mesh_h, "override mesh spacing");
    cmd->add_flag("--paper-scale", paper_scale, "use the paper-scale mesh spacing");
    cmd->add_option("--seed", seed, "override the scenario seed");
  };

  auto* mesh_cmd = app.add_subcommand("mesh", "generate and dump the mesh");
  mesh_cmd->add_option("--plan", plan_path, "floor plan JSON")->required();
  mesh_cmd->add_option("--mesh-h", mesh_h, "target spacing")->required();
  mesh_cmd->add_option("--out-dir", out_dir, "output directory");

  auto* fwd_cmd = app.add_subcommand("forward", "solve flow and temperature at a given theta");
  add_common(fwd_cmd, true);
  std::string theta_text;
  fwd_cmd->add_option("--theta", theta_text, "comma-separated door configuration");
  bool dump_vtk = false;
  fwd_cmd->add_flag("--vtk", dump_vtk, "dump VTK fields");

  auto* twin_cmd = app.add_subcommand("twin", "generate twin sensor data");
  add_common(twin_cmd, true);

  auto* est_cmd = app.add_subcommand("estimate", "gradient-based estimation");
  add_common(est_cmd, true);
  est_cmd->add_option("--data", data_path, "twin sensor CSV")->required();
  std::string init_theta_text;
  est_cmd->add_option("--init-theta", init_theta_text, "initial theta (default random)");

  auto* base_cmd = app.add_subcommand("baseline", "probabilistic baseline estimation");
  add_common(base_cmd, true);
  base_cmd->add_option("--data", data_path, "twin sensor CSV")->required();

  auto* exp_cmd = app.add_subcommand("experiment", "run a twin-recovery suite");
  exp_cmd->add_option("--config", config_path, "experiment JSON")->required();
  exp_cmd->add_option("--out-dir", out_dir, "output directory");
  int workers = 0;
  exp_cmd->add_option("--workers", workers, "parallel workers");

  auto* grad_cmd = app.add_subcommand("gradcheck", "three-way derivative agreement");
  add_common(grad_cmd, true);
  int n_dirs = 5;
  bool refine = false;
  grad_cmd->add_option("--directions", n_dirs, "number of random directions");
  grad_cmd->add_flag("--refine", refine, "also run on a half-h, half-dt discretization");
  grad_cmd->add_option("--out", out_file, "CSV report path");

  auto* cal_cmd = app.add_subcommand("calibrate", "calibrate vent fan forces");
  add_common(cal_cmd, true);
  cal_cmd->add_option("--out", out_file, "updated scenario JSON path");

  CLI11_PARSE(app, argc, argv);

  try {
    ensure_directory(out_dir);
    if (app.got_subcommand(mesh_cmd)) {
      FloorPlan plan = load_floor_plan(plan_path);
      Mesh mesh = generate_mesh(plan, mesh_h);
      VecX tags(mesh.n_triangles());
      MaterialFieldFn mf(plan, MaterialParams{}, DoorConfig::constant(plan.n_doors(), 0.0));
      for (int t = 0; t < mesh.n_triangles(); ++t)
        tags[t] = mf.alpha(mesh.centroid(t)) > 0 ? 1.0 : 0.0;
      write_vtk_mesh(mesh, out_dir + "/mesh.vtk", {{"solid", tags}});
      std::cout << "vertices " << mesh.n_vertices() << " triangles " << mesh.n_triangles()
                << " boundary_edges " << mesh.boundary_edges.size() << "\n";
      return 0;
    }

    Scenario scn = load_scenario(config_path);
    if (seed) scn.seed = seed;
    const Real h = pick_h(scn, mesh_h, paper_scale);
    scn.mesh_h = h;

    if (app.got_subcommand(fwd_cmd)) {
      const Model model = build_model(scn);
      const VecX theta =
          theta_text.empty() ? scn.theta_star : parse_theta(theta_text, model.n_doors());
      const VecX pi0 = make_pi0_field(model, scn.pi0_spec);
      const ForwardResult fr = solve_forward(model, theta, pi0, scn.horizon, scn.dt);
      const auto ids = scenario_sensor_ids(scn);
      SensorRecord rec = observe(fr.traj, model.phi_subset(ids), ids);
      save_sensor_csv(rec, out_dir + "/sensors.csv");
      std::cout << "newton_iterations " << fr.flow.newton_iterations << " residual "
                << fr.flow.residual_norm << " div_norm "
                << divergence_norm(model.flow_problem(theta), fr.flow) << "\n";
      if (dump_vtk) {
        write_vtk_fields(model, out_dir + "/fields_t0.vtk", &fr.traj.fields.front(), &fr.flow.u,
                         &fr.flow.p);
        write_vtk_fields(model, out_dir + "/fields_tN.vtk", &fr.traj.fields.back(), &fr.flow.u,
                         &fr.flow.p);
      }
      return 0;
    }
    if (app.got_subcommand(twin_cmd)) {
      const Model model = build_model(scn);
      const SensorRecord rec = generate_twin_data(model, scn);
      save_sensor_csv(rec, out_dir + "/twin.csv");
      std::cout << "wrote " << out_dir << "/twin.csv (manifest " << std::hex << rec.manifest
                << std::dec << ")\n";
      return 0;
    }
    if (app.got_subcommand(est_cmd)) {
      const Model model = build_model(scn);
      SensorRecord data = load_sensor_csv(data_path);
      require_manifest_match(data, scn, model.mesh_h);
      EstimationProblem pb = make_problem(model, data, scn);
      const VecX init_theta = init_theta_text.empty()
                                  ? VecX::Constant(model.n_doors(), 0.5)
                                  : parse_theta(init_theta_text, model.n_doors());
      EstimationState st = estimate(pb, VecX::Zero(model.S.n_dofs), init_theta);
      const VecX pi0_star = make_pi0_field(model, scn.pi0_spec);
      auto [et, ep] = error_metrics(scn.theta_star, st.theta, pi0_star, st.pi0, model.mass);
      std::vector<Real> costs;
      for (const auto& c : st.cost_history) costs.push_back(c.total);
      write_result_json(out_dir + "/estimate.json", st.theta, et, ep, st.iterations, costs,
                        st.V_history, st.solves, st.peak_tracked_bytes, st.converged,
                        st.termination);
      std::cout << "theta_hat " << st.theta.transpose() << "  e_theta " << et << "  e_pi0 " << ep
                << "  iterations " << st.iterations << "\n";
      return 0;
    }
    if (app.got_subcommand(base_cmd)) {
      const Model model = build_model(scn);
      SensorRecord data = load_sensor_csv(data_path);
      require_manifest_match(data, scn, model.mesh_h);
      EstimationProblem pb = make_problem(model, data, scn);
      BaselineState st = baseline_estimate(pb, VecX::Constant(model.n_doors(), 0.5),
                                           VecX::Zero(model.S.n_dofs), scn.est.max_iter);
      const VecX pi0_star = make_pi0_field(model, scn.pi0_spec);
      auto [et, ep] = error_metrics(scn.theta_star, st.p, pi0_star, st.e_pi0, model.mass);
      write_result_json(out_dir + "/baseline.json", st.p, et, ep, st.iterations, st.cost_history,
                        st.V_history, st.solves, st.peak_tracked_bytes, st.converged,
                        st.termination);
      std::cout << "p_hat " << st.p.transpose() << "  e_theta " << et << "  e_pi0 " << ep
                << "  iterations " << st.iterations << "\n";
      return 0;
    }
    if (app.got_subcommand(exp_cmd)) {
      const ExperimentReport rep = run_experiment(config_path, out_dir, workers);
      std::cout << "runs " << rep.runs.size() << "  mean e_theta G " << rep.mean_e_theta("G")
                << "  B " << rep.mean_e_theta("B") << "\n";
      return 0;
    }
    if (app.got_subcommand(grad_cmd)) {
      const std::string csv = out_file.empty() ? out_dir + "/gradcheck.csv" : out_file;
      const GradCheckResult res =
          gradcheck(scn, n_dirs, seed ? seed : scn.seed, csv, refine);
      std::cout << "max rel errors: adjoint-fd " << res.max_adj_fd << "  tangent-fd "
                << res.max_tan_fd << "  adjoint-tangent " << res.max_adj_tan << "\n";
      if (res.refined_mean_adj_fd >= 0)
        std::cout << "mean adjoint-fd: base " << res.mean_adj_fd << "  refined "
                  << res.refined_mean_adj_fd << "\n";
      std::cout << (res.pass ? "PASS" : "FAIL") << "\n";
      return res.pass ? 0 : 1;
    }
    if (app.got_subcommand(cal_cmd)) {
      Scenario cal = calibrate_vent_forces(scn);
      std::ostringstream os;
      os.precision(12);
      for (std::size_t v = 0; v < cal.plan.vents.size(); ++v)
        os << "vent " << (v + 1) << " target " << cal.plan.vents[v].target_speed << " force "
           << cal.plan.vents[v].force_magnitude << "\n";
      std::cout << os.str();
      if (!out_file.empty()) write_text_file(out_file, os.str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
