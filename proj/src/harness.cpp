#include "airest/harness.hpp"

#include <sys/resource.h>

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <thread>

#include "airest/io.hpp"

namespace airest {

using nlohmann::json;

std::size_t peak_rss_bytes() {
  rusage ru{};
  getrusage(RUSAGE_SELF, &ru);
  return static_cast<std::size_t>(ru.ru_maxrss) * 1024;
}

Real ExperimentReport::mean_e_theta(const std::string& method) const {
  Real sum = 0;
  int n = 0;
  for (const auto& r : runs)
    if (r.ok && r.method == method) {
      sum += r.e_theta;
      ++n;
    }
  return n ? sum / n : std::nan("");
}

Real ExperimentReport::mean_e_pi0(const std::string& method) const {
  Real sum = 0;
  int n = 0;
  for (const auto& r : runs)
    if (r.ok && r.method == method) {
      sum += r.e_pi0;
      ++n;
    }
  return n ? sum / n : std::nan("");
}

namespace {

struct RunSpec {
  int dataset_id = 0;
  int theta_id = 0, pi0_id = 0;
  std::string method;
  int init_id = 0;
};

VecX random_theta(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Real> uni(0.0, 1.0);
  VecX t(n);
  for (int i = 0; i < n; ++i) t[i] = uni(rng);
  return t;
}

RunResult execute_run(const Model& model, const Scenario& scn, const SensorRecord& data,
                      const VecX& theta_star, const VecX& pi0_star, const RunSpec& spec) {
  RunResult rr;
  rr.method = spec.method;
  rr.init_id = spec.init_id;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    EstimationProblem pb = make_problem(model, data, scn);
    if (spec.method == "G") {
      const VecX init_theta =
          random_theta(model.n_doors(), mix_seed(scn.seed, 1000 + 17 * spec.dataset_id +
                                                               static_cast<unsigned>(spec.init_id)));
      EstimationState st = estimate(pb, VecX::Zero(model.S.n_dofs), init_theta);
      rr.theta_hat = st.theta;
      rr.iterations = st.iterations;
      rr.accepted_steps = st.accepted_steps;
      rr.converged = st.converged;
      rr.termination = st.termination;
      rr.solves = st.solves;
      rr.peak_tracked_bytes = st.peak_tracked_bytes;
      rr.final_cost = st.cost_history.back().total;
      for (Real v : st.V_history)
        if (v > 1e-10 * std::max(1.0, st.cost_history.front().total)) rr.v_nonpositive = false;
      for (std::size_t k = 1; k < st.cost_history.size(); ++k)
        if (!(st.cost_history[k].total < st.cost_history[k - 1].total))
          rr.cost_strictly_decreasing = false;
      rr.theta_in_box = DoorConfig{st.theta}.in_box(0.0);
      auto [et, ep] = error_metrics(theta_star, st.theta, pi0_star, st.pi0, model.mass);
      rr.e_theta = et;
      rr.e_pi0 = ep;
    } else {
      const VecX init_p =
          random_theta(model.n_doors(), mix_seed(scn.seed, 2000 + 17 * spec.dataset_id +
                                                               static_cast<unsigned>(spec.init_id)));
      BaselineState st =
          baseline_estimate(pb, init_p, VecX::Zero(model.S.n_dofs), scn.est.max_iter);
      rr.theta_hat = st.p;
      rr.iterations = st.iterations;
      rr.accepted_steps = st.accepted_steps;
      rr.converged = st.converged;
      rr.termination = st.termination;
      rr.solves = st.solves;
      rr.peak_tracked_bytes = st.peak_tracked_bytes;
      rr.final_cost = st.cost_history.back();
      for (Real v : st.V_history)
        if (v > 1e-10 * std::max(1.0, st.cost_history.front())) rr.v_nonpositive = false;
      rr.theta_in_box = DoorConfig{st.p}.in_box(0.0);
      auto [et, ep] = error_metrics(theta_star, st.p, pi0_star, st.e_pi0, model.mass);
      rr.e_theta = et;
      rr.e_pi0 = ep;
    }
    rr.per_door_err = (theta_star - rr.theta_hat).cwiseAbs();
    rr.ok = true;
  } catch (const std::exception& e) {
    rr.ok = false;
    rr.error = e.what();
  }
  rr.wall_seconds =
      std::chrono::duration<Real>(std::chrono::steady_clock::now() - t0).count();
  rr.peak_rss_bytes = peak_rss_bytes();
  return rr;
}

}  // namespace

ExperimentReport run_twin_suite(const Scenario& base, const std::vector<VecX>& theta_configs,
                                const std::vector<std::string>& pi0_specs, int multistarts,
                                bool run_gradient, bool run_baseline, int workers) {
  const Model model = build_model(base);

  struct Dataset {
    Scenario scn;
    SensorRecord data;
    VecX theta_star, pi0_star;
    std::string label;
  };
  std::vector<Dataset> datasets;
  for (std::size_t ti = 0; ti < theta_configs.size(); ++ti) {
    for (std::size_t pi = 0; pi < pi0_specs.size(); ++pi) {
      Dataset ds;
      ds.scn = base;
      ds.scn.theta_star = theta_configs[ti];
      ds.scn.pi0_spec = pi0_specs[pi];
      ds.data = generate_twin_data(model, ds.scn);
      ds.theta_star = theta_configs[ti];
      ds.pi0_star = make_pi0_field(model, pi0_specs[pi]);
      std::ostringstream lbl;
      lbl << "theta";
      for (int i = 0; i < ds.theta_star.size(); ++i) lbl << static_cast<int>(ds.theta_star[i]);
      lbl << "_pi" << pi;
      ds.label = lbl.str();
      datasets.push_back(std::move(ds));
    }
  }

  std::vector<RunSpec> specs;
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    for (int init = 0; init < multistarts; ++init) {
      if (run_gradient) specs.push_back({static_cast<int>(d), 0, 0, "G", init});
      if (run_baseline) specs.push_back({static_cast<int>(d), 0, 0, "B", init});
    }
  }

  ExperimentReport report;
  report.runs.resize(specs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= specs.size()) return;
      const auto& sp = specs[i];
      const auto& ds = datasets[sp.dataset_id];
      RunResult rr = execute_run(model, ds.scn, ds.data, ds.theta_star, ds.pi0_star, sp);
      rr.dataset = ds.label;
      report.runs[i] = std::move(rr);
    }
  };
  const int n_workers = std::max(1, workers);
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return report;
}

ExperimentReport run_experiment(const std::string& config_path, const std::string& out_dir,
                                int workers_override) {
  const json cfg = json::parse(read_text_file(config_path));
  const std::string base_dir = std::filesystem::path(config_path).parent_path().string();
  std::string scn_path = cfg.at("scenario").get<std::string>();
  if (!scn_path.empty() && scn_path[0] != '/')
    scn_path = (std::filesystem::path(base_dir) / scn_path).string();
  Scenario base = load_scenario(scn_path);

  std::vector<VecX> thetas;
  for (const auto& t : cfg.at("theta_configs")) {
    VecX v(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) v[static_cast<int>(i)] = t[i].get<Real>();
    thetas.push_back(v);
  }
  std::vector<std::string> pi0s;
  for (const auto& p : cfg.at("pi0_fields")) pi0s.push_back(p.dump());
  bool run_g = true, run_b = true;
  if (cfg.contains("methods")) {
    run_g = run_b = false;
    for (const auto& m : cfg["methods"]) {
      if (m.get<std::string>() == "G") run_g = true;
      if (m.get<std::string>() == "B") run_b = true;
    }
  }
  const int multistarts = cfg.value("multistarts", base.multistarts);
  const int workers = workers_override > 0 ? workers_override : cfg.value("workers", 2);

  ExperimentReport report =
      run_twin_suite(base, thetas, pi0s, multistarts, run_g, run_b, workers);
  if (!out_dir.empty()) write_report(report, out_dir);
  return report;
}

FloorPlan restrict_doors(const FloorPlan& plan, const VecX& theta_star, int keep) {
  if (keep < 0 || keep > plan.n_doors())
    throw ValidationError("restrict_doors: keep out of range");
  FloorPlan out = plan;
  out.doors.clear();
  for (int i = 0; i < keep; ++i) out.doors.push_back({i + 1, plan.doors[i].rect});
  for (int i = keep; i < plan.n_doors(); ++i) {
    if (theta_star[i] < 0.5)
      out.walls.push_back(plan.doors[i].rect);  // frozen closed
    // frozen open: the region stays free air
  }
  return out;
}

std::vector<ScalingRow> run_scaling(const Scenario& base, int max_doors, int iters) {
  std::vector<ScalingRow> rows;
  for (int nd = 1; nd <= max_doors; ++nd) {
    Scenario scn = base;
    scn.plan = restrict_doors(base.plan, base.theta_star, nd);
    scn.theta_star = base.theta_star.head(nd);
    scn.est.max_iter = iters;
    scn.est.stop_tol = 0.0;  // run exactly `iters` outer iterations

    const Model model = build_model(scn);
    const SensorRecord data = generate_twin_data(model, scn);
    EstimationProblem pb = make_problem(model, data, scn);

    ScalingRow row;
    row.n_doors = nd;
    {
      const VecX init_theta = random_theta(nd, mix_seed(scn.seed, 31 + nd));
      EstimationState st = estimate(pb, VecX::Zero(model.S.n_dofs), init_theta);
      row.iterations_g = st.iterations;
      row.solves_g = st.solves;
      row.peak_bytes_g = st.peak_tracked_bytes;
    }
    {
      const VecX init_p = VecX::Constant(nd, 0.5);
      BaselineState st = baseline_estimate(pb, init_p, VecX::Zero(model.S.n_dofs), iters);
      row.iterations_b = st.iterations;
      row.solves_b = st.solves;
      row.peak_bytes_b = st.peak_tracked_bytes;
    }
    rows.push_back(row);
  }
  return rows;
}

void write_scaling_csv(const std::vector<ScalingRow>& rows, const std::string& path) {
  std::ofstream out(path);
  out << "n_doors,iters_g,flow_g,thermal_g,adjoint_g,peak_bytes_g,"
         "iters_b,flow_b,thermal_b,adjoint_b,tangent_b,peak_bytes_b\n";
  for (const auto& r : rows) {
    out << r.n_doors << ',' << r.iterations_g << ',' << r.solves_g.flow << ','
        << r.solves_g.thermal << ',' << r.solves_g.adjoint << ',' << r.peak_bytes_g << ','
        << r.iterations_b << ',' << r.solves_b.flow << ',' << r.solves_b.thermal << ','
        << r.solves_b.adjoint << ',' << r.solves_b.tangent << ',' << r.peak_bytes_b << "\n";
  }
}

namespace {

VecX random_smooth_field(const Model& model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Real> uni(0.0, 1.0);
  std::ostringstream spec;
  spec << "{\"type\":\"bumps\",\"taper\":0.6,\"bumps\":[";
  for (int b = 0; b < 3; ++b) {
    const Real cx = 0.15 * model.mesh.width + 0.7 * model.mesh.width * uni(rng);
    const Real cy = 0.15 * model.mesh.height + 0.7 * model.mesh.height * uni(rng);
    const Real amp = 2.0 * uni(rng) - 1.0;
    spec << (b ? "," : "") << "{\"center\":[" << cx << "," << cy << "],\"amplitude\":" << amp
         << ",\"sigma\":1.2}";
  }
  spec << "]}";
  return make_pi0_field(model, spec.str());
}

struct DirectionCheck {
  Real adjoint = 0, tangent = 0, fd = 0;
  Real err_adj_fd = 0, err_tan_fd = 0, err_adj_tan = 0;
};

std::vector<DirectionCheck> run_direction_checks(const Scenario& scn, Real h_mesh, Real dt,
                                                 int n_directions, std::uint64_t seed) {
  Scenario local = scn;
  local.dt = dt;
  const Model model = Model::build(local.plan, local.params, h_mesh, local.heat_scale);
  const SensorRecord data = generate_twin_data(model, local);

  // evaluation point away from the twin truth so the mismatch is nonzero
  const int nd = model.n_doors();
  VecX theta_eval(nd);
  for (int i = 0; i < nd; ++i) theta_eval[i] = 0.35 + (nd > 1 ? 0.3 * i / (nd - 1) : 0.15);
  const VecX pi0_eval = 0.5 * make_pi0_field(model, local.pi0_spec);

  const ForwardResult fr = solve_forward(model, theta_eval, pi0_eval, local.horizon, local.dt);
  const GradientBundle grad = adjoint_gradient(model, theta_eval, pi0_eval, fr.flow, fr.traj,
                                               data, local.eta0, local.eta1);

  std::vector<DirectionCheck> checks;
  std::mt19937_64 rng(mix_seed(seed, 0x6772616463686b31ull));
  std::uniform_real_distribution<Real> uni(-1.0, 1.0);
  for (int d = 0; d < n_directions + 1; ++d) {
    VecX dtheta = VecX::Zero(nd);
    VecX dpi0 = VecX::Zero(model.S.n_dofs);
    if (d > 0) {
      for (int i = 0; i < nd; ++i) dtheta[i] = uni(rng);
      dpi0 = random_smooth_field(model, mix_seed(seed, 900 + d));
    }
    DirectionCheck c;
    c.adjoint = grad.d_pi0.dot(model.mass * dpi0) + grad.d_theta.dot(dtheta);
    c.tangent = tangent_solve(model, theta_eval, pi0_eval, fr.flow, fr.traj, data, dpi0, dtheta,
                              local.eta0, local.eta1)
                    .dJ;
    const Real h_fd = 1e-4;
    c.fd = (d == 0) ? 0.0
                    : fd_directional(model, theta_eval, pi0_eval, data, dpi0, dtheta, h_fd,
                                     local.eta0, local.eta1, local.horizon, local.dt);
    const Real ref = std::max({std::abs(c.fd), std::abs(c.tangent), 1e-14});
    c.err_adj_fd = std::abs(c.adjoint - c.fd) / ref;
    c.err_tan_fd = std::abs(c.tangent - c.fd) / ref;
    c.err_adj_tan = std::abs(c.adjoint - c.tangent) / ref;
    checks.push_back(c);
  }
  return checks;
}

}  // namespace

GradCheckResult gradcheck(const Scenario& s, int n_directions, std::uint64_t seed,
                          const std::string& out_csv, bool refine) {
  GradCheckResult res;
  const auto base = run_direction_checks(s, s.mesh_h, s.dt, n_directions, seed);

  std::ofstream csv;
  if (!out_csv.empty()) {
    csv.open(out_csv);
    csv << "mesh,direction,adjoint,tangent,fd,rel_adj_fd,rel_tan_fd,rel_adj_tan\n";
    csv << std::setprecision(12);
  }
  Real sum_adj_fd = 0;
  int counted = 0;
  bool pass = true;
  for (std::size_t d = 0; d < base.size(); ++d) {
    const auto& c = base[d];
    if (csv.is_open())
      csv << "base," << d << ',' << c.adjoint << ',' << c.tangent << ',' << c.fd << ','
          << c.err_adj_fd << ',' << c.err_tan_fd << ',' << c.err_adj_tan << "\n";
    if (d == 0) {
      // zero direction: all three derivatives must vanish
      if (std::abs(c.adjoint) > 1e-12 || std::abs(c.tangent) > 1e-12 || std::abs(c.fd) > 1e-12)
        pass = false;
      continue;
    }
    res.max_adj_fd = std::max(res.max_adj_fd, c.err_adj_fd);
    res.max_tan_fd = std::max(res.max_tan_fd, c.err_tan_fd);
    res.max_adj_tan = std::max(res.max_adj_tan, c.err_adj_tan);
    sum_adj_fd += c.err_adj_fd;
    ++counted;
    if (c.err_adj_fd > 0.05 || c.err_tan_fd > 0.01 || c.err_adj_tan > 0.02) pass = false;
  }
  res.mean_adj_fd = counted ? sum_adj_fd / counted : 0.0;

  if (refine) {
    const auto fine = run_direction_checks(s, 0.5 * s.mesh_h, 0.5 * s.dt, n_directions, seed);
    Real sum = 0;
    int cnt = 0;
    for (std::size_t d = 1; d < fine.size(); ++d) {
      const auto& c = fine[d];
      if (csv.is_open())
        csv << "refined," << d << ',' << c.adjoint << ',' << c.tangent << ',' << c.fd << ','
            << c.err_adj_fd << ',' << c.err_tan_fd << ',' << c.err_adj_tan << "\n";
      sum += c.err_adj_fd;
      ++cnt;
    }
    res.refined_mean_adj_fd = cnt ? sum / cnt : 0.0;
    if (!(res.refined_mean_adj_fd < res.mean_adj_fd)) pass = false;
  }
  res.pass = pass;
  return res;
}

Scenario calibrate_vent_forces(Scenario s, int passes) {
  const VecX theta_open = VecX::Ones(s.plan.n_doors());

  auto solved_mean_speed = [&](const FloorPlan& plan, std::size_t vent_id) {
    const Model m = Model::build(plan, s.params, s.mesh_h, s.heat_scale);
    const FlowSolution fl = solve_flow(m.flow_problem(theta_open));
    return mean_speed(m.V, fl.u, plan.vents[vent_id].rect);
  };

  for (int pass = 0; pass < passes; ++pass) {
    for (std::size_t v = 0; v < s.plan.vents.size(); ++v) {
      const Real target = s.plan.vents[v].target_speed;
      if (target <= 0) {
        s.plan.vents[v].force_magnitude = 0;
        continue;
      }
      Real lo = 0, hi = std::max(s.plan.vents[v].force_magnitude, 1e-3);
      FloorPlan plan = s.plan;
      auto speed_at = [&](Real f) {
        plan.vents[v].force_magnitude = f;
        return solved_mean_speed(plan, v);
      };
      int expand = 0;
      while (speed_at(hi) < target) {
        hi *= 4;
        if (++expand > 12)
          throw SolverError("calibrate_vent_forces: could not bracket the target speed");
      }
      Real f = hi;
      for (int it = 0; it < 60; ++it) {
        f = 0.5 * (lo + hi);
        const Real sp = speed_at(f);
        if (std::abs(sp - target) <= 0.05 * target) break;
        (sp < target ? lo : hi) = f;
      }
      s.plan.vents[v].force_magnitude = f;
    }
  }
  return s;
}

void write_report(const ExperimentReport& report, const std::string& out_dir) {
  ensure_directory(out_dir);
  ensure_directory(out_dir + "/plotdata");
  {
    std::ofstream csv(out_dir + "/report.csv");
    csv << "dataset,method,init,ok,e_theta,e_pi0,final_cost,iterations,accepted,converged,"
           "termination,flow_solves,thermal_solves,adjoint_solves,tangent_solves,"
           "peak_tracked_bytes,peak_rss_bytes,wall_seconds,error\n";
    csv << std::setprecision(10);
    for (const auto& r : report.runs) {
      csv << r.dataset << ',' << r.method << ',' << r.init_id << ',' << (r.ok ? 1 : 0) << ','
          << r.e_theta << ',' << r.e_pi0 << ',' << r.final_cost << ',' << r.iterations << ','
          << r.accepted_steps << ',' << (r.converged ? 1 : 0) << ',' << r.termination << ','
          << r.solves.flow << ',' << r.solves.thermal << ',' << r.solves.adjoint << ','
          << r.solves.tangent << ',' << r.peak_tracked_bytes << ',' << r.peak_rss_bytes << ','
          << r.wall_seconds << ',' << '"' << r.error << '"' << "\n";
    }
  }
  {
    json j;
    j["runs"] = json::array();
    for (const auto& r : report.runs) {
      json run;
      run["dataset"] = r.dataset;
      run["method"] = r.method;
      run["init"] = r.init_id;
      run["ok"] = r.ok;
      run["e_theta"] = r.e_theta;
      run["e_pi0"] = r.e_pi0;
      run["theta_hat"] = std::vector<Real>(r.theta_hat.data(), r.theta_hat.data() + r.theta_hat.size());
      run["iterations"] = r.iterations;
      run["cost"] = r.final_cost;
      run["converged"] = r.converged;
      run["termination"] = r.termination;
      run["solves"] = {{"flow", r.solves.flow},
                       {"thermal", r.solves.thermal},
                       {"adjoint", r.solves.adjoint},
                       {"tangent", r.solves.tangent}};
      run["peak_memory_bytes"] = r.peak_tracked_bytes;
      run["peak_rss_bytes"] = r.peak_rss_bytes;
      run["wall_seconds"] = r.wall_seconds;
      if (!r.ok) run["error"] = r.error;
      j["runs"].push_back(std::move(run));
    }
    for (const std::string m : {"G", "B"}) {
      j["aggregate"][m]["mean_e_theta"] = report.mean_e_theta(m);
      j["aggregate"][m]["mean_e_pi0"] = report.mean_e_pi0(m);
    }
    write_text_file(out_dir + "/report.json", j.dump(2) + "\n");
  }
  {
    std::ofstream bar(out_dir + "/plotdata/e_theta_bar.csv");
    bar << "method,mean_e_theta\n";
    bar << "B," << report.mean_e_theta("B") << "\nG," << report.mean_e_theta("G") << "\n";
    std::ofstream bar2(out_dir + "/plotdata/e_pi0_bar.csv");
    bar2 << "method,mean_e_pi0\n";
    bar2 << "B," << report.mean_e_pi0("B") << "\nG," << report.mean_e_pi0("G") << "\n";
  }
}

}  // namespace airest
