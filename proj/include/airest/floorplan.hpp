#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "airest/types.hpp"

namespace airest {

class Mesh;  // mesh.hpp

/// Axis-aligned rectangle [x0,x1] x [y0,y1].
struct Rect {
  Real x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  Real width() const { return x1 - x0; }
  Real height() const { return y1 - y0; }
  Real area() const { return width() * height(); }
  Vec2 center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
  bool contains(const Vec2& p) const {
    return p.x() >= x0 && p.x() <= x1 && p.y() >= y0 && p.y() <= y1;
  }
  /// Open-interior overlap test; touching edges do not count.
  bool overlaps(const Rect& o) const {
    return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1;
  }
  bool inside(const Rect& o) const {
    return x0 >= o.x0 && x1 <= o.x1 && y0 >= o.y0 && y1 <= o.y1;
  }
};

/// Area occupied by one door when closed.
struct DoorRegion {
  int id = 0;  // 1-based
  Rect rect;
};

/// Relaxed door configuration, one entry per door in [0,1]
/// (1 = open, 0 = closed).
struct DoorConfig {
  VecX theta;

  static DoorConfig constant(int n, Real value) {
    DoorConfig c;
    c.theta = VecX::Constant(n, value);
    return c;
  }
  bool in_box(Real slack = 0.0) const {
    return (theta.array() >= -slack).all() && (theta.array() <= 1.0 + slack).all();
  }
};

/// Thermostat sampling the temperature around `position` with a compactly
/// supported bump kernel of radius `radius`. `sigma` normalizes the kernel to
/// unit integral on a specific mesh; it is 0 until normalize_bumps has run.
struct Thermostat {
  Vec2 position{0, 0};
  Real radius = 1.0;
  Real sigma = 0.0;
};

/// HVAC vent: a fan forcing air over `rect` along `direction`, plus a heat
/// source of density heat_rate (scaled by the scenario's heat factor).
struct Vent {
  Rect rect;
  Vec2 direction{1, 0};
  Real force_magnitude = 0.0;
  Real heat_rate = 0.0;
  Real target_speed = 0.0;  // calibration target for the fan force
};

/// Straight axis-aligned segment on the domain boundary (part of Gamma_i).
struct BoundarySegment {
  Vec2 a{0, 0}, b{0, 0};
};

/// Physical constants of the nondimensional model.
struct MaterialParams {
  Real alpha0 = 0.0;     // viscous friction in free air
  Real alpha_w = 1e3;    // viscous friction in walls / closed doors
  Real kappa0 = 1e-2;    // thermal diffusivity in free air
  Real kappa_w = 1e-4;   // thermal diffusivity in walls / closed doors
  Real Re = 1e2;         // Reynolds number
  Real T_A = 23.83;      // boundary temperature (metadata; fields are deviations)
  Real p_A = 101.3;      // inlet pressure (metadata; solver uses deviation 0)

  void validate() const;
};

/// Building geometry: walls, doors, vents, thermostats and inlet segments in
/// a width x height rectangle. Immutable after construction.
struct FloorPlan {
  Real width = 0, height = 0;
  std::vector<Rect> walls;
  std::vector<DoorRegion> doors;
  std::vector<Vent> vents;
  std::vector<Thermostat> thermostats;
  std::vector<BoundarySegment> inlets;
  std::string name;
  Real meters_per_unit = 1.0;  // metadata only

  int n_doors() const { return static_cast<int>(doors.size()); }
  int n_thermostats() const { return static_cast<int>(thermostats.size()); }
  Rect domain() const { return {0, 0, width, height}; }

  /// Checks every geometric invariant; throws ValidationError naming the
  /// first violation.
  void validate() const;
};

FloorPlan load_floor_plan(const std::string& path);
FloorPlan parse_floor_plan(const std::string& json_text);

/// Pointwise material coefficients for a fixed (plan, params, theta).
/// Both alpha and kappa are affine in theta; walls always contribute the
/// wall values.
class MaterialFieldFn {
 public:
  MaterialFieldFn(const FloorPlan& plan, const MaterialParams& params,
                  const DoorConfig& theta);

  Real alpha(const Vec2& x) const;
  Real kappa(const Vec2& x) const;

 private:
  const FloorPlan* plan_;
  MaterialParams params_;
  VecX theta_;
};

MaterialFieldFn material_fields(const FloorPlan& plan, const MaterialParams& params,
                                const DoorConfig& theta);

/// Unnormalized kernel exp(-1/(r^2 - d^2)) for d < r, 0 otherwise.
Real bump_kernel(const Vec2& center, Real radius, const Vec2& x);

/// sigma * kernel; requires sigma normalized for the active mesh.
Real bump_weight(const Thermostat& th, const Vec2& x);

/// Returns a copy of the plan whose thermostats carry sigma such that the
/// mesh-quadrature integral of each bump equals one.
FloorPlan normalize_bumps(const FloorPlan& plan, const Mesh& mesh);

}  // namespace airest
