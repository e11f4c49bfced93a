#pragma once

#include <array>
#include <string>
#include <vector>

#include "airest/floorplan.hpp"
#include "airest/types.hpp"

namespace airest {

enum class BoundaryTag { Wall, Inlet };

/// Conforming triangulation of the plan rectangle. Grid lines are snapped to
/// every wall/door/vent/inlet coordinate, so rectangular features are unions
/// of whole elements. Immutable after construction.
class Mesh {
 public:
  struct BoundaryEdge {
    int v0 = -1, v1 = -1;        // vertex indices
    BoundaryTag tag = BoundaryTag::Wall;
  };

  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;  // CCW vertex indices
  std::vector<BoundaryEdge> boundary_edges;

  // unique edges as sorted vertex pairs; tri_edges[t][k] is the edge opposite
  // local vertex k
  std::vector<std::array<int, 2>> edges;
  std::vector<std::array<int, 3>> tri_edges;

  // geometry cache
  std::vector<Real> tri_area;
  std::vector<Mat2> inv_jac_t;  // J^{-T}; maps reference gradients to physical

  Real width = 0, height = 0;

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_triangles() const { return static_cast<int>(triangles.size()); }
  int n_edges() const { return static_cast<int>(edges.size()); }

  Vec2 centroid(int t) const {
    const auto& tr = triangles[t];
    return (vertices[tr[0]] + vertices[tr[1]] + vertices[tr[2]]) / 3.0;
  }
  Real total_area() const;

  /// True if the vertex lies on the domain boundary rectangle.
  bool on_boundary(const Vec2& p) const;
};

/// Structured, feature-snapped triangulation with spacing <= target_h.
/// Throws ValidationError if target_h cannot resolve a door.
Mesh generate_mesh(const FloorPlan& plan, Real target_h);

/// Re-derives boundary edges and tags each one Wall or Inlet by whether its
/// midpoint lies on a declared inlet segment. Throws if an inlet segment is
/// not covered by matching boundary edges.
Mesh mark_boundaries(Mesh mesh, const FloorPlan& plan);

/// Per-element values of a pointwise function sampled at centroids (exact for
/// fields that are constant on each element, as snapped indicators are).
VecX sample_per_element(const Mesh& mesh, const std::function<Real(const Vec2&)>& f);

/// Legacy ASCII VTK dump of the mesh; optional per-cell integer data.
void write_vtk_mesh(const Mesh& mesh, const std::string& path,
                    const std::vector<std::pair<std::string, VecX>>& cell_data = {},
                    const std::vector<std::pair<std::string, VecX>>& point_data = {});

}  // namespace airest
