#include <doctest.h>

#include <cmath>
#include <map>

#include "airest/flow.hpp"
#include "airest/model.hpp"

using namespace airest;

namespace {

FloorPlan channel_plan(bool with_force) {
  FloorPlan plan;
  plan.width = 4.0;
  plan.height = 1.0;
  plan.thermostats.push_back({Vec2(2.0, 0.5), 0.25, 0.0});
  plan.inlets.push_back({Vec2(0, 0), Vec2(0, 1)});
  plan.inlets.push_back({Vec2(4, 0), Vec2(4, 1)});
  if (with_force) {
    Vent fan;
    fan.rect = {0, 0, 4, 1};
    fan.direction = Vec2(1, 0);
    fan.force_magnitude = 0.01;
    plan.vents.push_back(fan);
  }
  return plan;
}

Model channel_model(Real h) {
  MaterialParams mp;
  mp.Re = 100.0;
  return Model::build(channel_plan(true), mp, h, 0.0);
}

}  // namespace

TEST_CASE("zero forcing and no inlet gives the rest state") {
  FloorPlan plan;
  plan.width = 2;
  plan.height = 2;
  plan.thermostats.push_back({Vec2(1, 1), 0.4, 0.0});
  MaterialParams mp;
  const Model model = Model::build(plan, mp, 0.4, 0.0);
  const FlowSolution fl = solve_flow(model.flow_problem(VecX::Zero(0)));
  CHECK(fl.u.lpNorm<Eigen::Infinity>() <= 1e-14);
  CHECK(fl.p.lpNorm<Eigen::Infinity>() <= 1e-14);  // pinned gauge value 0
}

TEST_CASE("uniform body force in a channel reproduces the Poiseuille profile") {
  const Model model = channel_model(0.125);
  const FlowSolution fl = solve_flow(model.flow_problem(VecX::Zero(0)));

  // exact: u = (Re f / 2) y (1-y) e_x with f = 0.01, Re = 100
  const Real c = 100.0 * 0.01 / 2.0;
  VecX exact(model.V.n_dofs);
  const Mesh& mesh = model.mesh;
  auto profile = [&](const Vec2& x) { return c * x.y() * (1.0 - x.y()); };
  for (int v = 0; v < mesh.n_vertices(); ++v) {
    exact[2 * v] = profile(mesh.vertices[v]);
    exact[2 * v + 1] = 0.0;
  }
  for (int e = 0; e < mesh.n_edges(); ++e) {
    const Vec2 mid = 0.5 * (mesh.vertices[mesh.edges[e][0]] + mesh.vertices[mesh.edges[e][1]]);
    const int node = mesh.n_vertices() + e;
    exact[2 * node] = profile(mid);
    exact[2 * node + 1] = 0.0;
  }
  const Real rel = (fl.u - exact).norm() / exact.norm();
  CHECK(rel <= 0.02);  // exact solution lies in the P2 space, error ~ solver tol
  CHECK(rel <= 1e-7);
  CHECK(divergence_norm(model.flow_problem(VecX::Zero(0)), fl) <= 1e-8);
}

TEST_CASE("wall dofs are exactly zero and the divergence residual is tiny") {
  const Model model = channel_model(0.2);
  const FlowProblem pb = model.flow_problem(VecX::Zero(0));
  const FlowSolution fl = solve_flow(pb);
  for (int d : pb.wall_dofs) CHECK(fl.u[d] == 0.0);
  CHECK(divergence_norm(pb, fl) <= 1e-8);
  CHECK(fl.residual_norm <= 1e-9);
}

TEST_CASE("divergence norm of simple fields") {
  const Model model = channel_model(0.25);
  const FlowProblem pb = model.flow_problem(VecX::Zero(0));
  VecX zero = VecX::Zero(model.V.n_dofs);
  FlowSolution f0;
  f0.u = zero;
  CHECK(divergence_norm(pb, f0) == 0.0);
  VecX ones(model.V.n_dofs);
  for (int n = 0; n < model.V.n_nodes; ++n) {
    ones[2 * n] = 1.0;
    ones[2 * n + 1] = 0.0;
  }
  FlowSolution f1;
  f1.u = ones;
  CHECK(divergence_norm(pb, f1) <= 1e-12);
}

TEST_CASE("closed door blocks the flow (Brinkman penalization)") {
  const FloorPlan plan = load_floor_plan(std::string(AIREST_DATA_DIR) + "/plans/tworoom.json");
  MaterialParams mp;
  const Model model = Model::build(plan, mp, 0.22, 0.0);
  VecX closed = VecX::Zero(1);
  const FlowSolution fl = solve_flow(model.flow_problem(closed));

  const Rect door = plan.doors[0].rect;
  const Real v_door = mean_speed(model.V, fl.u, door);
  // free-air region: average over elements with alpha == 0
  const VecX alpha = model.alpha_elem(closed);
  Real integral = 0, area = 0;
  for (int t = 0; t < model.mesh.n_triangles(); ++t) {
    if (alpha[t] != 0.0) continue;
    area += model.mesh.tri_area[t];
    integral += model.mesh.tri_area[t] *
                eval_velocity(model.V, fl.u, t, {1.0 / 3, 1.0 / 3, 1.0 / 3}).norm();
  }
  const Real v_free = integral / area;
  MESSAGE("door mean speed ", v_door, " free mean speed ", v_free);
  CHECK(v_door <= 1e-2 * v_free);

  SUBCASE("penalization is monotone in alpha_w") {
    MaterialParams strong = mp;
    strong.alpha_w = 1e5;
    const Model model5 = Model::build(plan, strong, 0.22, 0.0);
    const FlowSolution fl5 = solve_flow(model5.flow_problem(closed));
    CHECK(mean_speed(model5.V, fl5.u, door) < v_door);
  }
}

TEST_CASE("reynolds continuation") {
  const Model model = channel_model(0.25);
  const FlowProblem pb = model.flow_problem(VecX::Zero(0));
  SUBCASE("degenerate single step equals the direct solve") {
    const FlowSolution direct = solve_flow(pb);
    const FlowSolution cont = reynolds_continuation(pb, {pb.Re});
    CHECK((direct.u - cont.u).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
  SUBCASE("staged solve warm-starts and converges at least as fast") {
    const FlowSolution direct = solve_flow(pb);
    const FlowSolution cont = reynolds_continuation(pb, {1.0, 10.0, 100.0});
    CHECK(cont.newton_iterations <= std::max(direct.newton_iterations, 1));
    CHECK(cont.residual_norm <= 1e-9);
  }
  SUBCASE("empty step list is a precondition error") {
    CHECK_THROWS_AS(reynolds_continuation(pb, {}), ValidationError);
  }
  SUBCASE("non-increasing steps are rejected") {
    CHECK_THROWS_AS(reynolds_continuation(pb, {10.0, 10.0, 100.0}), ValidationError);
  }
  SUBCASE("last step must match the target Reynolds number") {
    CHECK_THROWS_AS(reynolds_continuation(pb, {1.0, 50.0}), ValidationError);
  }
}

TEST_CASE("flow depends continuously on theta") {
  const FloorPlan plan = load_floor_plan(std::string(AIREST_DATA_DIR) + "/plans/tworoom.json");
  MaterialParams mp;
  const Model model = Model::build(plan, mp, 0.25, 0.0);
  const VecX theta = VecX::Constant(1, 0.5);
  const FlowSolution base = solve_flow(model.flow_problem(theta));
  Real prev_ratio = -1;
  for (Real delta : {1e-3, 5e-4}) {
    VecX tp = theta;
    tp[0] += delta;
    const FlowSolution moved = solve_flow(model.flow_problem(tp), &base);
    const Real ratio = (moved.u - base.u).norm() / (base.u.norm() * delta);
    MESSAGE("theta-sensitivity estimate C = ", ratio, " at delta = ", delta);
    CHECK(ratio < 1e4);
    if (prev_ratio > 0) CHECK(ratio < 3.0 * prev_ratio);
    prev_ratio = ratio;
  }
}

TEST_CASE("mirrored plan geometry mirrors the solution") {
  const FloorPlan plan =
      load_floor_plan(std::string(AIREST_DATA_DIR) + "/plans/symmetric_tworoom.json");
  MaterialParams mp;
  const Model model = Model::build(plan, mp, 0.25, 0.0);
  const FlowSolution fl = solve_flow(model.flow_problem(VecX::Constant(1, 0.5)));

  // build coordinate -> P2 node lookup
  const Mesh& mesh = model.mesh;
  auto key = [&](const Vec2& p) {
    return std::make_pair(std::llround(p.x() * 1e9), std::llround(p.y() * 1e9));
  };
  std::map<std::pair<long long, long long>, int> node_at;
  for (int v = 0; v < mesh.n_vertices(); ++v) node_at[key(mesh.vertices[v])] = v;
  for (int e = 0; e < mesh.n_edges(); ++e) {
    const Vec2 mid = 0.5 * (mesh.vertices[mesh.edges[e][0]] + mesh.vertices[mesh.edges[e][1]]);
    node_at[key(mid)] = mesh.n_vertices() + e;
  }
  Real mismatch2 = 0, norm2 = 0;
  for (const auto& [k, node] : node_at) {
    const Vec2 p(k.first * 1e-9, k.second * 1e-9);
    const auto it = node_at.find(key(Vec2(mesh.width - p.x(), p.y())));
    REQUIRE(it != node_at.end());
    const int mirror = it->second;
    // u_x is antisymmetric, u_y symmetric under the x-mirror
    mismatch2 += std::pow(fl.u[2 * node] + fl.u[2 * mirror], 2) +
                 std::pow(fl.u[2 * node + 1] - fl.u[2 * mirror + 1], 2);
    norm2 += fl.u[2 * node] * fl.u[2 * node] + fl.u[2 * node + 1] * fl.u[2 * node + 1];
  }
  CHECK(std::sqrt(mismatch2) <= 1e-8 * std::max(1.0, std::sqrt(norm2)));
}
