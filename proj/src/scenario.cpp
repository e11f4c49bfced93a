#include "airest/scenario.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "airest/io.hpp"

namespace airest {

using nlohmann::json;

namespace {

VecX json_vector(const json& j) {
  VecX v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<Real>();
  return v;
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("scenario parse error: ") + e.what());
  }
  Scenario s;
  try {
    s.name = j.value("name", std::string("scenario"));
    s.plan_path = j.at("plan").get<std::string>();
    if (!s.plan_path.empty() && s.plan_path[0] != '/' && !base_dir.empty())
      s.plan_path = (std::filesystem::path(base_dir) / s.plan_path).string();
    s.plan = load_floor_plan(s.plan_path);

    if (j.contains("material")) {
      const auto& m = j["material"];
      s.params.alpha0 = m.value("alpha0", s.params.alpha0);
      s.params.alpha_w = m.value("alpha_w", s.params.alpha_w);
      s.params.kappa0 = m.value("kappa0", s.params.kappa0);
      s.params.kappa_w = m.value("kappa_w", s.params.kappa_w);
      s.params.Re = m.value("Re", s.params.Re);
      s.params.T_A = m.value("T_A", s.params.T_A);
      s.params.p_A = m.value("p_A", s.params.p_A);
    }
    s.params.validate();

    s.mesh_h = j.value("mesh_h", s.mesh_h);
    s.paper_mesh_h = j.value("paper_mesh_h", s.paper_mesh_h);
    s.heat_scale = j.value("heat_scale", s.heat_scale);
    s.horizon = j.value("horizon", s.horizon);
    s.dt = j.value("dt", s.dt);
    s.eta0 = j.value("eta0", s.eta0);
    s.eta1 = j.value("eta1", s.eta1);
    if (j.contains("theta_star"))
      s.theta_star = json_vector(j["theta_star"]);
    else
      s.theta_star = VecX::Zero(s.plan.n_doors());
    if (s.theta_star.size() != s.plan.n_doors())
      throw ValidationError("scenario: theta_star size does not match plan doors");
    s.pi0_spec = j.contains("pi0") ? j["pi0"].dump() : std::string("{\"type\":\"zero\"}");
    if (j.contains("sensors"))
      for (const auto& id : j["sensors"]) s.sensor_ids.push_back(id.get<int>());
    if (s.sensor_ids.empty() && j.contains("sensors"))
      throw ValidationError("scenario: sensor subset must be nonempty");
    s.noise = j.value("noise", 0.0);

    if (j.contains("estimator")) {
      const auto& e = j["estimator"];
      s.est.gamma = e.value("gamma", s.est.gamma);
      s.est.alpha_bar = e.value("alpha_bar", s.est.alpha_bar);
      s.est.beta_bar = e.value("beta_bar", s.est.beta_bar);
      s.est.stop_tol = e.value("stop_tol", s.est.stop_tol);
      s.est.max_iter = e.value("max_iter", s.est.max_iter);
      s.est.armijo_jmax = e.value("armijo_jmax", s.est.armijo_jmax);
      s.est.baseline_config_budget =
          e.value("baseline_config_budget", s.est.baseline_config_budget);
    }
    s.multistarts = j.value("multistarts", s.multistarts);
    s.seed = j.value("seed", static_cast<std::uint64_t>(1));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("scenario schema error: ") + e.what());
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  const std::string base = std::filesystem::path(path).parent_path().string();
  return parse_scenario(read_text_file(path), base);
}

Model build_model(const Scenario& s, Real h_override) {
  const Real h = h_override > 0 ? h_override : s.mesh_h;
  return Model::build(s.plan, s.params, h, s.heat_scale);
}

VecX make_pi0_field(const Model& model, const std::string& spec_json) {
  json spec;
  try {
    spec = json::parse(spec_json);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("pi0 spec parse error: ") + e.what());
  }
  const std::string type = spec.value("type", "zero");
  const Real taper = spec.value("taper", 0.6);
  const Mesh& mesh = model.mesh;

  auto taper_at = [&](const Vec2& x) {
    const Real bd = std::min(std::min(x.x(), mesh.width - x.x()),
                             std::min(x.y(), mesh.height - x.y()));
    return std::clamp(bd / taper, 0.0, 1.0);
  };

  VecX field = VecX::Zero(model.S.n_dofs);
  if (type == "zero") {
    // nothing
  } else if (type == "bumps") {
    for (int v = 0; v < mesh.n_vertices(); ++v) {
      const Vec2& x = mesh.vertices[v];
      Real val = 0;
      for (const auto& b : spec.at("bumps")) {
        const Vec2 c(b.at("center")[0].get<Real>(), b.at("center")[1].get<Real>());
        const Real a = b.at("amplitude").get<Real>();
        const Real s = b.at("sigma").get<Real>();
        val += a * std::exp(-(x - c).squaredNorm() / (2.0 * s * s));
      }
      field[v] = val * taper_at(x);
    }
  } else if (type == "rooms") {
    for (int v = 0; v < mesh.n_vertices(); ++v) {
      const Vec2& x = mesh.vertices[v];
      Real val = 0;
      for (const auto& r : spec.at("regions")) {
        const Rect rect{r.at("rect").at("x0").get<Real>(), r.at("rect").at("y0").get<Real>(),
                        r.at("rect").at("x1").get<Real>(), r.at("rect").at("y1").get<Real>()};
        if (rect.contains(x)) val = r.at("value").get<Real>();
      }
      field[v] = val * taper_at(x);
    }
  } else {
    throw ValidationError("pi0 spec: unknown type '" + type + "'");
  }
  for (int d : model.s_boundary) field[d] = 0.0;
  return field;
}

std::vector<int> scenario_sensor_ids(const Scenario& s) {
  if (!s.sensor_ids.empty()) return s.sensor_ids;
  std::vector<int> ids(s.plan.n_thermostats());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  return ids;
}

std::uint64_t scenario_manifest(const Scenario& s, Real mesh_h_used) {
  std::ostringstream os;
  os.precision(17);
  os << s.plan.name << '|' << s.plan.width << ',' << s.plan.height << '|';
  for (const auto& w : s.plan.walls) os << 'w' << w.x0 << ',' << w.y0 << ',' << w.x1 << ',' << w.y1;
  for (const auto& d : s.plan.doors)
    os << 'd' << d.rect.x0 << ',' << d.rect.y0 << ',' << d.rect.x1 << ',' << d.rect.y1;
  for (const auto& v : s.plan.vents)
    os << 'v' << v.rect.x0 << ',' << v.rect.y0 << ',' << v.rect.x1 << ',' << v.rect.y1 << ','
       << v.direction.x() << ',' << v.direction.y() << ',' << v.force_magnitude << ','
       << v.heat_rate;
  for (const auto& t : s.plan.thermostats)
    os << 't' << t.position.x() << ',' << t.position.y() << ',' << t.radius;
  for (const auto& i : s.plan.inlets)
    os << 'i' << i.a.x() << ',' << i.a.y() << ',' << i.b.x() << ',' << i.b.y();
  os << "|m" << s.params.alpha0 << ',' << s.params.alpha_w << ',' << s.params.kappa0 << ','
     << s.params.kappa_w << ',' << s.params.Re;
  os << "|h" << mesh_h_used << "|T" << s.horizon << ",dt" << s.dt << "|hs" << s.heat_scale;
  os << "|theta";
  for (int i = 0; i < s.theta_star.size(); ++i) os << ',' << s.theta_star[i];
  os << "|pi0" << s.pi0_spec << "|sensors";
  for (int id : scenario_sensor_ids(s)) os << ',' << id;
  os << "|noise" << s.noise << "|seed" << s.seed;
  return fnv1a(os.str());
}

SensorRecord generate_twin_data(const Model& model, const Scenario& s) {
  const VecX pi0_star = make_pi0_field(model, s.pi0_spec);
  const ForwardResult fr = solve_forward(model, s.theta_star, pi0_star, s.horizon, s.dt);
  const std::vector<int> ids = scenario_sensor_ids(s);
  SensorRecord rec = observe(fr.traj, model.phi_subset(ids), ids);
  if (s.noise > 0) {
    std::mt19937_64 rng(mix_seed(s.seed, 0x7477696e64617461ull));
    std::normal_distribution<Real> gauss(0.0, s.noise);
    for (int i = 0; i < rec.y.rows(); ++i)
      for (int k = 0; k < rec.y.cols(); ++k) rec.y(i, k) += gauss(rng);
    rec.pi0_hat = rec.y.col(0);
  }
  rec.manifest = scenario_manifest(s, model.mesh_h);
  return rec;
}

void require_manifest_match(const SensorRecord& rec, const Scenario& s, Real mesh_h_used) {
  if (rec.manifest == 0) return;  // unbound record (hand-made data)
  const std::uint64_t expect = scenario_manifest(s, mesh_h_used);
  if (rec.manifest != expect) {
    std::ostringstream os;
    os << "sensor record manifest " << std::hex << rec.manifest
       << " does not match scenario manifest " << expect
       << "; the data was generated by a different scenario";
    throw ValidationError(os.str());
  }
}

EstimationProblem make_problem(const Model& model, const SensorRecord& data, const Scenario& s) {
  EstimationProblem pb;
  pb.model = &model;
  pb.data = &data;
  pb.horizon = s.horizon;
  pb.dt = s.dt;
  pb.eta0 = s.eta0;
  pb.eta1 = s.eta1;
  pb.opt = s.est;
  return pb;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace airest
