#include <doctest.h>

#include <fstream>
#include <map>

#include "airest/mesh.hpp"

using namespace airest;

namespace {

FloorPlan box_plan(Real w, Real h) {
  FloorPlan plan;
  plan.width = w;
  plan.height = h;
  plan.thermostats.push_back({Vec2(w / 2, h / 2), std::min(w, h) / 4, 0.0});
  return plan;
}

}  // namespace

TEST_CASE("unit square with no features meshes to the structured count") {
  const FloorPlan plan = box_plan(1, 1);
  for (int n : {4, 8}) {
    const Mesh mesh = generate_mesh(plan, 1.0 / n);
    CHECK(mesh.n_triangles() == 2 * n * n);
    CHECK(mesh.n_vertices() == (n + 1) * (n + 1));
    CHECK(mesh.total_area() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("triangle areas sum to the domain area") {
  const FloorPlan plan = load_floor_plan(std::string(AIREST_DATA_DIR) + "/plans/apartment.json");
  const Mesh mesh = generate_mesh(plan, 0.45);
  CHECK(mesh.total_area() == doctest::Approx(7.6 * 16.8).epsilon(1e-10));
}

TEST_CASE("edge sharing: interior edges twice, boundary edges once") {
  const FloorPlan plan = box_plan(2, 3);
  const Mesh mesh = generate_mesh(plan, 0.5);
  std::map<std::pair<int, int>, int> count;
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      int a = t[(k + 1) % 3], b = t[(k + 2) % 3];
      if (a > b) std::swap(a, b);
      count[{a, b}]++;
    }
  }
  int boundary = 0;
  for (const auto& [e, c] : count) {
    CHECK((c == 1 || c == 2));
    if (c == 1) ++boundary;
  }
  CHECK(boundary == static_cast<int>(mesh.boundary_edges.size()));
}

TEST_CASE("apartment at paper resolution lands near the reported element count") {
  const FloorPlan plan = load_floor_plan(std::string(AIREST_DATA_DIR) + "/plans/apartment.json");
  const Mesh mesh = generate_mesh(plan, 0.25);
  CHECK(mesh.n_triangles() >= 6276 / 2);
  CHECK(mesh.n_triangles() <= 6276 * 2);
}

TEST_CASE("coarse target_h cannot resolve a door") {
  FloorPlan plan = box_plan(10, 10);
  plan.doors.push_back({1, {4, 4, 4.9, 5.5}});
  CHECK_THROWS_WITH_AS(generate_mesh(plan, 1.0), doctest::Contains("door 1"), ValidationError);
}

TEST_CASE("boundary tagging") {
  SUBCASE("no inlets means every edge is a wall") {
    const FloorPlan plan = box_plan(2, 2);
    const Mesh mesh = generate_mesh(plan, 0.25);
    for (const auto& be : mesh.boundary_edges) CHECK(be.tag == BoundaryTag::Wall);
  }
  SUBCASE("inlet covering a tenth of one side is tagged with matching length") {
    FloorPlan plan = box_plan(10, 4);
    plan.inlets.push_back({Vec2(0, 0), Vec2(1, 0)});
    const Mesh mesh = generate_mesh(plan, 0.5);
    Real tagged = 0;
    for (const auto& be : mesh.boundary_edges)
      if (be.tag == BoundaryTag::Inlet)
        tagged += (mesh.vertices[be.v1] - mesh.vertices[be.v0]).norm();
    CHECK(tagged == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("tagging is exhaustive and exclusive") {
    FloorPlan plan = box_plan(10, 4);
    plan.inlets.push_back({Vec2(0, 0), Vec2(1, 0)});
    const Mesh mesh = generate_mesh(plan, 0.5);
    Real total = 0;
    for (const auto& be : mesh.boundary_edges)
      total += (mesh.vertices[be.v1] - mesh.vertices[be.v0]).norm();
    CHECK(total == doctest::Approx(2 * (10 + 4)).epsilon(1e-12));
  }
}

TEST_CASE("feature edges land on grid lines") {
  FloorPlan plan = box_plan(5, 5);
  plan.doors.push_back({1, {1.13, 2.07, 2.21, 2.94}});
  const Mesh mesh = generate_mesh(plan, 0.4);
  // every door-rect corner must coincide with a mesh vertex
  for (Real x : {1.13, 2.21}) {
    for (Real y : {2.07, 2.94}) {
      bool found = false;
      for (const auto& v : mesh.vertices)
        if ((v - Vec2(x, y)).norm() < 1e-12) found = true;
      CHECK(found);
    }
  }
  // and no element straddles the door boundary
  int inside = 0;
  const Rect r{1.13, 2.07, 2.21, 2.94};
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tr = mesh.triangles[t];
    int corners_in = 0;
    for (int k = 0; k < 3; ++k)
      if (r.contains(mesh.vertices[tr[k]])) ++corners_in;
    if (r.contains(mesh.centroid(t))) {
      ++inside;
      CHECK(corners_in == 3);
    }
  }
  CHECK(inside > 0);
  // element-aligned indicator integrates to the exact rectangle area
  Real area = 0;
  for (int t = 0; t < mesh.n_triangles(); ++t)
    if (r.contains(mesh.centroid(t))) area += mesh.tri_area[t];
  CHECK(area == doctest::Approx(r.area()).epsilon(1e-12));
}

TEST_CASE("mesh generation is deterministic") {
  const FloorPlan plan = load_floor_plan(std::string(AIREST_DATA_DIR) + "/plans/tworoom.json");
  const Mesh a = generate_mesh(plan, 0.3);
  const Mesh b = generate_mesh(plan, 0.3);
  REQUIRE(a.n_vertices() == b.n_vertices());
  REQUIRE(a.n_triangles() == b.n_triangles());
  for (int v = 0; v < a.n_vertices(); ++v) CHECK(a.vertices[v] == b.vertices[v]);
  for (int t = 0; t < a.n_triangles(); ++t) CHECK(a.triangles[t] == b.triangles[t]);
}

TEST_CASE("mesh vtk dump writes a parseable header") {
  const FloorPlan plan = box_plan(1, 1);
  const Mesh mesh = generate_mesh(plan, 0.5);
  const std::string path = "/tmp/airest_test_mesh.vtk";
  write_vtk_mesh(mesh, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "# vtk DataFile Version 3.0");
}
