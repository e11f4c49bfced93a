#include "airest/floorplan.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

#include "airest/fem.hpp"
#include "airest/mesh.hpp"
#include "airest/quadrature.hpp"

namespace airest {

using nlohmann::json;

void MaterialParams::validate() const {
  if (!(alpha_w > alpha0) || alpha0 < 0)
    throw ValidationError("material params: require alpha_w > alpha0 >= 0");
  if (!(kappa0 > kappa_w) || !(kappa_w > 0))
    throw ValidationError("material params: require kappa0 > kappa_w > 0");
  if (!(Re > 0)) throw ValidationError("material params: require Re > 0");
}

namespace {

bool on_segment(const Vec2& p, const BoundarySegment& s, Real tol) {
  const Vec2 d = s.b - s.a;
  const Real len = d.norm();
  if (len < tol) return (p - s.a).norm() <= tol;
  const Real t = (p - s.a).dot(d) / (len * len);
  if (t < -tol / len || t > 1.0 + tol / len) return false;
  const Vec2 proj = s.a + t * d;
  return (p - proj).norm() <= tol;
}

bool segment_on_rect_boundary(const BoundarySegment& s, const Rect& dom, Real tol) {
  auto on_bnd = [&](const Vec2& p) {
    const bool x_edge = std::abs(p.x()) <= tol || std::abs(p.x() - dom.x1) <= tol;
    const bool y_edge = std::abs(p.y()) <= tol || std::abs(p.y() - dom.y1) <= tol;
    return (x_edge && p.y() >= -tol && p.y() <= dom.y1 + tol) ||
           (y_edge && p.x() >= -tol && p.x() <= dom.x1 + tol);
  };
  if (!on_bnd(s.a) || !on_bnd(s.b)) return false;
  // axis aligned, both endpoints on the same side
  return std::abs(s.a.x() - s.b.x()) <= tol || std::abs(s.a.y() - s.b.y()) <= tol;
}

}  // namespace

void FloorPlan::validate() const {
  if (width <= 0 || height <= 0) throw ValidationError("domain must have positive size");
  const Rect dom = domain();
  auto check_rect = [&](const Rect& r, const std::string& what) {
    if (r.width() <= 0 || r.height() <= 0)
      throw ValidationError(what + ": rectangle must have positive area");
    if (!r.inside(dom)) throw ValidationError(what + ": rectangle outside domain");
  };
  for (std::size_t i = 0; i < walls.size(); ++i)
    check_rect(walls[i], "wall " + std::to_string(i + 1));
  for (const auto& d : doors) check_rect(d.rect, "door " + std::to_string(d.id));
  for (const auto& v : vents) check_rect(v.rect, "vent");

  for (std::size_t i = 0; i < doors.size(); ++i) {
    for (std::size_t j = i + 1; j < doors.size(); ++j)
      if (doors[i].rect.overlaps(doors[j].rect))
        throw ValidationError("door " + std::to_string(doors[i].id) + " overlaps door " +
                              std::to_string(doors[j].id));
    for (std::size_t j = 0; j < walls.size(); ++j)
      if (doors[i].rect.overlaps(walls[j]))
        throw ValidationError("door " + std::to_string(doors[i].id) + " overlaps wall " +
                              std::to_string(j + 1));
  }

  if (thermostats.empty()) throw ValidationError("plan needs at least one thermostat");
  for (std::size_t i = 0; i < thermostats.size(); ++i) {
    const auto& th = thermostats[i];
    if (th.radius <= 0)
      throw ValidationError("thermostat " + std::to_string(i + 1) + ": radius must be > 0");
    if (!dom.contains(th.position))
      throw ValidationError("thermostat " + std::to_string(i + 1) + ": center outside domain");
  }

  for (const auto& v : vents) {
    if (std::abs(v.direction.norm() - 1.0) > 1e-6)
      throw ValidationError("vent direction must be a unit vector");
  }

  const Real tol = 1e-9 * std::max(width, height);
  for (std::size_t i = 0; i < inlets.size(); ++i) {
    if (!segment_on_rect_boundary(inlets[i], dom, tol))
      throw ValidationError("inlet segment " + std::to_string(i + 1) +
                            " does not lie on the domain boundary");
  }
}

FloorPlan parse_floor_plan(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("floor plan parse error: ") + e.what());
  }
  FloorPlan plan;
  try {
    const auto& dom = j.at("domain");
    plan.width = dom.at("width").get<Real>();
    plan.height = dom.at("height").get<Real>();
    plan.name = j.value("name", std::string());
    plan.meters_per_unit = j.value("meters_per_unit", 1.0);

    auto rect_of = [](const json& r) {
      return Rect{r.at("x0").get<Real>(), r.at("y0").get<Real>(), r.at("x1").get<Real>(),
                  r.at("y1").get<Real>()};
    };
    for (const auto& w : j.value("walls", json::array())) plan.walls.push_back(rect_of(w));
    int door_id = 1;
    for (const auto& d : j.value("doors", json::array()))
      plan.doors.push_back({door_id++, rect_of(d)});
    for (const auto& v : j.value("vents", json::array())) {
      Vent vent;
      vent.rect = rect_of(v.at("rect"));
      vent.direction = Vec2(v.at("direction").at(0).get<Real>(),
                            v.at("direction").at(1).get<Real>());
      vent.force_magnitude = v.value("force_magnitude", 0.0);
      vent.heat_rate = v.value("heat_rate", 0.0);
      vent.target_speed = v.value("target_speed", 0.0);
      plan.vents.push_back(vent);
    }
    for (const auto& t : j.value("thermostats", json::array())) {
      Thermostat th;
      th.position = Vec2(t.at("position").at(0).get<Real>(), t.at("position").at(1).get<Real>());
      th.radius = t.value("radius", 1.0);
      plan.thermostats.push_back(th);
    }
    for (const auto& s : j.value("inlets", json::array())) {
      BoundarySegment seg;
      seg.a = Vec2(s.at("a").at(0).get<Real>(), s.at("a").at(1).get<Real>());
      seg.b = Vec2(s.at("b").at(0).get<Real>(), s.at("b").at(1).get<Real>());
      plan.inlets.push_back(seg);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("floor plan schema error: ") + e.what());
  }
  plan.validate();
  return plan;
}

FloorPlan load_floor_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open floor plan file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_floor_plan(ss.str());
}

MaterialFieldFn::MaterialFieldFn(const FloorPlan& plan, const MaterialParams& params,
                                 const DoorConfig& theta)
    : plan_(&plan), params_(params), theta_(theta.theta) {
  params.validate();
  if (theta_.size() != plan.n_doors())
    throw ValidationError("door config dimension does not match plan door count");
}

Real MaterialFieldFn::alpha(const Vec2& x) const {
  for (const auto& w : plan_->walls)
    if (w.contains(x)) return params_.alpha_w;
  Real a = params_.alpha0;
  for (int i = 0; i < plan_->n_doors(); ++i)
    if (plan_->doors[i].rect.contains(x))
      a += (1.0 - theta_[i]) * (params_.alpha_w - params_.alpha0);
  return a;
}

Real MaterialFieldFn::kappa(const Vec2& x) const {
  for (const auto& w : plan_->walls)
    if (w.contains(x)) return params_.kappa_w;
  Real k = params_.kappa0;
  for (int i = 0; i < plan_->n_doors(); ++i)
    if (plan_->doors[i].rect.contains(x))
      k += (1.0 - theta_[i]) * (params_.kappa_w - params_.kappa0);
  return k;
}

MaterialFieldFn material_fields(const FloorPlan& plan, const MaterialParams& params,
                                const DoorConfig& theta) {
  return MaterialFieldFn(plan, params, theta);
}

Real bump_kernel(const Vec2& center, Real radius, const Vec2& x) {
  const Real d2 = (x - center).squaredNorm();
  const Real r2 = radius * radius;
  if (d2 >= r2) return 0.0;
  return std::exp(-1.0 / (r2 - d2));
}

Real bump_weight(const Thermostat& th, const Vec2& x) {
  return th.sigma * bump_kernel(th.position, th.radius, x);
}

FloorPlan normalize_bumps(const FloorPlan& plan, const Mesh& mesh) {
  FloorPlan out = plan;
  const QuadRule& rule = triangle_rule(5);
  for (std::size_t i = 0; i < out.thermostats.size(); ++i) {
    auto& th = out.thermostats[i];
    Real mass = 0.0;
    for (int t = 0; t < mesh.n_triangles(); ++t) {
      const auto& tr = mesh.triangles[t];
      for (int q = 0; q < rule.size(); ++q) {
        const auto& b = rule.bary[q];
        const Vec2 x = b[0] * mesh.vertices[tr[0]] + b[1] * mesh.vertices[tr[1]] +
                       b[2] * mesh.vertices[tr[2]];
        mass += rule.weights[q] * mesh.tri_area[t] * bump_kernel(th.position, th.radius, x);
      }
    }
    if (mass <= 1e-14)
      throw ValidationError("thermostat " + std::to_string(i + 1) +
                            ": bump support carries no quadrature mass on this mesh");
    th.sigma = 1.0 / mass;
  }
  return out;
}

}  // namespace airest
