#include <doctest.h>

#include <cmath>

#include "airest/floorplan.hpp"
#include "airest/mesh.hpp"
#include "airest/quadrature.hpp"
#include "airest/thermal.hpp"

using namespace airest;

namespace {

FloorPlan box_plan(Real w, Real h) {
  FloorPlan plan;
  plan.width = w;
  plan.height = h;
  plan.thermostats.push_back({Vec2(w / 2, h / 2), std::min(w, h) / 4, 0.0});
  return plan;
}

// high-resolution oracle: the bump kernel is radial, so its integral over the
// disc is 2*pi * int_0^r exp(-1/(r^2 - rho^2)) rho d rho
Real bump_mass_polar(Real r) {
  std::vector<Real> x, w;
  gauss_legendre(400, 0.0, r, x, w);
  Real acc = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    acc += w[i] * x[i] * std::exp(-1.0 / (r * r - x[i] * x[i]));
  return 2.0 * M_PI * acc;
}

}  // namespace

TEST_CASE("apartment plan loads with expected inventory") {
  const FloorPlan plan = load_floor_plan(std::string(AIREST_DATA_DIR) + "/plans/apartment.json");
  CHECK(plan.n_doors() == 4);
  CHECK(plan.n_thermostats() == 3);
  CHECK(plan.width == doctest::Approx(7.6));
  CHECK(plan.height == doctest::Approx(16.8));
  CHECK(plan.vents.size() == 4);
  CHECK(plan.inlets.size() == 1);
}

TEST_CASE("empty-interior plan is valid with zero doors") {
  FloorPlan plan = box_plan(5, 5);
  CHECK_NOTHROW(plan.validate());
  CHECK(plan.n_doors() == 0);
}

TEST_CASE("door overlapping a wall is rejected") {
  FloorPlan plan = box_plan(5, 5);
  plan.walls.push_back({1, 1, 3, 1.5});
  plan.doors.push_back({1, {2.5, 1.2, 3.5, 1.4}});
  CHECK_THROWS_AS(plan.validate(), ValidationError);
}

TEST_CASE("door outside the domain is rejected") {
  FloorPlan plan = box_plan(5, 5);
  plan.doors.push_back({1, {4.5, 1, 5.5, 2}});
  CHECK_THROWS_AS(plan.validate(), ValidationError);
}

TEST_CASE("material fields follow the affine door law") {
  FloorPlan plan = box_plan(10, 10);
  plan.doors.push_back({1, {2, 2, 3, 4}});
  plan.walls.push_back({6, 6, 7, 8});
  MaterialParams mp;  // alpha_w = 1e3, kappa_w = 1e-4 defaults
  const Vec2 in_door(2.5, 3.0), in_wall(6.5, 7.0), in_air(8.0, 2.0);

  SUBCASE("open door reduces to free-air values") {
    auto f = material_fields(plan, mp, DoorConfig::constant(1, 1.0));
    CHECK(f.alpha(in_door) == 0.0);
    CHECK(f.kappa(in_door) == doctest::Approx(mp.kappa0));
  }
  SUBCASE("closed door matches the wall values") {
    auto f = material_fields(plan, mp, DoorConfig::constant(1, 0.0));
    CHECK(f.alpha(in_door) == doctest::Approx(1e3));
    CHECK(f.kappa(in_door) == doctest::Approx(1e-4));
  }
  SUBCASE("half-open door interpolates") {
    auto f = material_fields(plan, mp, DoorConfig::constant(1, 0.5));
    CHECK(f.alpha(in_door) == doctest::Approx(500.0));
  }
  SUBCASE("walls are theta-independent") {
    auto f0 = material_fields(plan, mp, DoorConfig::constant(1, 0.0));
    auto f1 = material_fields(plan, mp, DoorConfig::constant(1, 1.0));
    CHECK(f0.alpha(in_wall) == f1.alpha(in_wall));
    CHECK(f0.alpha(in_wall) == doctest::Approx(1e3));
    CHECK(f0.alpha(in_air) == 0.0);
  }
  SUBCASE("affinity in theta holds to machine precision") {
    DoorConfig a{VecX::Constant(1, 0.2)}, b{VecX::Constant(1, 0.9)};
    const Real s = 0.37;
    DoorConfig mix{s * a.theta + (1 - s) * b.theta};
    auto fa = material_fields(plan, mp, a);
    auto fb = material_fields(plan, mp, b);
    auto fm = material_fields(plan, mp, mix);
    for (const Vec2& x : {in_door, in_wall, in_air}) {
      CHECK(fm.alpha(x) ==
            doctest::Approx(s * fa.alpha(x) + (1 - s) * fb.alpha(x)).epsilon(1e-13));
      CHECK(fm.kappa(x) ==
            doctest::Approx(s * fa.kappa(x) + (1 - s) * fb.kappa(x)).epsilon(1e-13));
    }
  }
  SUBCASE("dimension mismatch is an error") {
    CHECK_THROWS_AS(material_fields(plan, mp, DoorConfig::constant(3, 1.0)), ValidationError);
  }
}

TEST_CASE("material sampling is deterministic") {
  const FloorPlan plan = load_floor_plan(std::string(AIREST_DATA_DIR) + "/plans/apartment.json");
  MaterialParams mp;
  const Mesh mesh = generate_mesh(plan, 0.5);
  auto f = material_fields(plan, mp, DoorConfig::constant(4, 0.3));
  VecX a1 = sample_per_element(mesh, [&](const Vec2& x) { return f.alpha(x); });
  VecX a2 = sample_per_element(mesh, [&](const Vec2& x) { return f.alpha(x); });
  CHECK((a1 - a2).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("bump weight formula") {
  Thermostat th;
  th.position = Vec2(3, 3);
  th.radius = 1.0;
  th.sigma = 2.0;
  CHECK(bump_weight(th, Vec2(3, 3)) == doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-14));
  CHECK(bump_weight(th, Vec2(4, 3)) == 0.0);
  CHECK(bump_weight(th, Vec2(4.5, 3)) == 0.0);
  // smooth decay to zero at the rim
  CHECK(bump_weight(th, Vec2(3.999, 3)) < 1e-100);
}

TEST_CASE("bump normalization matches the polar quadrature oracle") {
  FloorPlan plan = box_plan(6, 6);
  plan.thermostats[0] = {Vec2(3, 3), 1.0, 0.0};
  const Mesh fine = generate_mesh(plan, 0.1);
  const FloorPlan normalized = normalize_bumps(plan, fine);
  const Real sigma_oracle = 1.0 / bump_mass_polar(1.0);
  CHECK(normalized.thermostats[0].sigma == doctest::Approx(sigma_oracle).epsilon(1e-6));

  // integral of the normalized bump is one on the normalizing mesh
  const FemSpace S(fine, SpaceKind::P1Scalar);
  const auto phi = observation_vectors(normalized, S);
  CHECK(phi[0].sum() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("sigma is recomputed per mesh") {
  FloorPlan plan = box_plan(6, 6);
  plan.thermostats[0] = {Vec2(3, 3), 1.0, 0.0};
  const Mesh coarse = generate_mesh(plan, 0.5);
  const Mesh fine = generate_mesh(plan, 0.15);
  const Real s_coarse = normalize_bumps(plan, coarse).thermostats[0].sigma;
  const Real s_fine = normalize_bumps(plan, fine).thermostats[0].sigma;
  CHECK(s_coarse != s_fine);
  CHECK(s_coarse == doctest::Approx(s_fine).epsilon(0.05));

  const FemSpace Sc(coarse, SpaceKind::P1Scalar);
  const auto phi_c = observation_vectors(normalize_bumps(plan, coarse), Sc);
  CHECK(phi_c[0].sum() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("bump support smaller than an element is refused") {
  FloorPlan plan = box_plan(6, 6);
  plan.thermostats[0] = {Vec2(3.1, 3.1), 0.05, 0.0};
  const Mesh coarse = generate_mesh(plan, 0.75);
  CHECK_THROWS_AS(normalize_bumps(plan, coarse), ValidationError);
}

TEST_CASE("vent direction must be a unit vector") {
  FloorPlan plan = box_plan(5, 5);
  Vent v;
  v.rect = {1, 1, 2, 1.5};
  v.direction = Vec2(1, 1);
  plan.vents.push_back(v);
  CHECK_THROWS_AS(plan.validate(), ValidationError);
}

TEST_CASE("inlet away from the boundary is rejected") {
  FloorPlan plan = box_plan(5, 5);
  plan.inlets.push_back({Vec2(1, 1), Vec2(2, 1)});
  CHECK_THROWS_AS(plan.validate(), ValidationError);
}
