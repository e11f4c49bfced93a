#include "airest/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

namespace airest {

Real Mesh::total_area() const {
  Real a = 0;
  for (Real t : tri_area) a += t;
  return a;
}

bool Mesh::on_boundary(const Vec2& p) const {
  const Real tol = 1e-9 * std::max(width, height);
  return std::abs(p.x()) <= tol || std::abs(p.x() - width) <= tol || std::abs(p.y()) <= tol ||
         std::abs(p.y() - height) <= tol;
}

namespace {

// Grid lines: every feature coordinate, with uniform fill so gaps stay <= h.
std::vector<Real> grid_lines(Real extent, Real h, std::vector<Real> feature_coords) {
  const Real tol = 1e-9 * std::max<Real>(extent, 1.0);
  feature_coords.push_back(0.0);
  feature_coords.push_back(extent);
  std::sort(feature_coords.begin(), feature_coords.end());
  std::vector<Real> lines;
  for (Real c : feature_coords) {
    if (c < -tol || c > extent + tol) continue;
    c = std::clamp(c, 0.0, extent);
    if (lines.empty() || c - lines.back() > tol) lines.push_back(c);
  }
  std::vector<Real> out;
  for (std::size_t i = 0; i + 1 < lines.size(); ++i) {
    const Real a = lines[i], b = lines[i + 1];
    out.push_back(a);
    const int n = static_cast<int>(std::ceil((b - a) / h - 1e-12));
    for (int k = 1; k < n; ++k) out.push_back(a + (b - a) * k / n);
  }
  out.push_back(lines.back());
  return out;
}

void build_geometry_cache(Mesh& mesh) {
  const int nt = mesh.n_triangles();
  mesh.tri_area.resize(nt);
  mesh.inv_jac_t.resize(nt);
  for (int t = 0; t < nt; ++t) {
    const auto& tr = mesh.triangles[t];
    const Vec2 a = mesh.vertices[tr[0]];
    const Vec2 e1 = mesh.vertices[tr[1]] - a;
    const Vec2 e2 = mesh.vertices[tr[2]] - a;
    Mat2 J;
    J.col(0) = e1;
    J.col(1) = e2;
    const Real det = J.determinant();
    if (det <= 0) throw ValidationError("mesh: degenerate or inverted triangle");
    mesh.tri_area[t] = 0.5 * det;
    mesh.inv_jac_t[t] = J.inverse().transpose();
  }
}

void build_edges(Mesh& mesh) {
  std::map<std::pair<int, int>, int> edge_id;
  mesh.edges.clear();
  mesh.tri_edges.assign(mesh.n_triangles(), {-1, -1, -1});
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tr = mesh.triangles[t];
    for (int k = 0; k < 3; ++k) {
      int a = tr[(k + 1) % 3], b = tr[(k + 2) % 3];
      if (a > b) std::swap(a, b);
      auto [it, inserted] = edge_id.try_emplace({a, b}, static_cast<int>(mesh.edges.size()));
      if (inserted) mesh.edges.push_back({a, b});
      mesh.tri_edges[t][k] = it->second;
    }
  }
}

}  // namespace

Mesh generate_mesh(const FloorPlan& plan, Real target_h) {
  if (target_h <= 0) throw ValidationError("generate_mesh: target_h must be > 0");
  for (const auto& d : plan.doors) {
    const Real feature = std::min(d.rect.width(), d.rect.height());
    if (target_h >= feature + 1e-12)
      throw ValidationError("generate_mesh: target_h " + std::to_string(target_h) +
                            " too coarse to resolve door " + std::to_string(d.id) +
                            " (min dimension " + std::to_string(feature) + ")");
  }

  std::vector<Real> fx, fy;
  auto add_rect = [&](const Rect& r) {
    fx.push_back(r.x0);
    fx.push_back(r.x1);
    fy.push_back(r.y0);
    fy.push_back(r.y1);
  };
  for (const auto& w : plan.walls) add_rect(w);
  for (const auto& d : plan.doors) add_rect(d.rect);
  for (const auto& v : plan.vents) add_rect(v.rect);
  for (const auto& s : plan.inlets) {
    fx.push_back(s.a.x());
    fx.push_back(s.b.x());
    fy.push_back(s.a.y());
    fy.push_back(s.b.y());
  }

  const std::vector<Real> xs = grid_lines(plan.width, target_h, fx);
  const std::vector<Real> ys = grid_lines(plan.height, target_h, fy);
  const int nx = static_cast<int>(xs.size());
  const int ny = static_cast<int>(ys.size());

  Mesh mesh;
  mesh.width = plan.width;
  mesh.height = plan.height;
  mesh.vertices.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) mesh.vertices.emplace_back(xs[i], ys[j]);
  auto vid = [&](int i, int j) { return j * nx + i; };

  // Diagonal orientation per cell is chosen by domain quadrant so that the
  // triangulation commutes with mirroring the plan about either midline.
  mesh.triangles.reserve(2 * static_cast<std::size_t>(nx - 1) * (ny - 1));
  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      const int bl = vid(i, j), br = vid(i + 1, j), tl = vid(i, j + 1), tr = vid(i + 1, j + 1);
      const Real cx = 0.5 * (xs[i] + xs[i + 1]) - 0.5 * plan.width;
      const Real cy = 0.5 * (ys[j] + ys[j + 1]) - 0.5 * plan.height;
      const Real s = cx * cy;
      bool diag_bl_tr;  // "/" diagonal joins bl-tr
      if (s > 0)
        diag_bl_tr = true;
      else if (s < 0)
        diag_bl_tr = false;
      else
        diag_bl_tr = (cx + cy > 0);
      if (diag_bl_tr) {
        mesh.triangles.push_back({bl, br, tr});
        mesh.triangles.push_back({bl, tr, tl});
      } else {
        mesh.triangles.push_back({bl, br, tl});
        mesh.triangles.push_back({br, tr, tl});
      }
    }
  }

  build_geometry_cache(mesh);
  build_edges(mesh);
  return mark_boundaries(std::move(mesh), plan);
}

Mesh mark_boundaries(Mesh mesh, const FloorPlan& plan) {
  // Boundary edges are those used by exactly one triangle.
  std::map<std::pair<int, int>, int> use_count;
  for (const auto& tr : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      int a = tr[(k + 1) % 3], b = tr[(k + 2) % 3];
      if (a > b) std::swap(a, b);
      use_count[{a, b}]++;
    }
  }
  const Real tol = 1e-9 * std::max(plan.width, plan.height);
  mesh.boundary_edges.clear();
  for (const auto& [e, count] : use_count) {
    if (count != 1) continue;
    Mesh::BoundaryEdge be;
    be.v0 = e.first;
    be.v1 = e.second;
    const Vec2 mid = 0.5 * (mesh.vertices[be.v0] + mesh.vertices[be.v1]);
    be.tag = BoundaryTag::Wall;
    for (const auto& seg : plan.inlets) {
      const Vec2 d = seg.b - seg.a;
      const Real len = d.norm();
      if (len < tol) continue;
      const Real t = (mid - seg.a).dot(d) / (len * len);
      const Vec2 proj = seg.a + std::clamp(t, 0.0, 1.0) * d;
      if ((mid - proj).norm() <= tol && t >= -tol && t <= 1.0 + tol) {
        be.tag = BoundaryTag::Inlet;
        break;
      }
    }
    mesh.boundary_edges.push_back(be);
  }

  // Each declared inlet segment must be covered by tagged edges.
  for (std::size_t s = 0; s < plan.inlets.size(); ++s) {
    const auto& seg = plan.inlets[s];
    const Real seg_len = (seg.b - seg.a).norm();
    Real covered = 0;
    for (const auto& be : mesh.boundary_edges) {
      if (be.tag != BoundaryTag::Inlet) continue;
      const Vec2 mid = 0.5 * (mesh.vertices[be.v0] + mesh.vertices[be.v1]);
      const Vec2 d = seg.b - seg.a;
      const Real t = (mid - seg.a).dot(d) / (seg_len * seg_len);
      const Vec2 proj = seg.a + std::clamp(t, 0.0, 1.0) * d;
      if ((mid - proj).norm() <= tol)
        covered += (mesh.vertices[be.v1] - mesh.vertices[be.v0]).norm();
    }
    if (covered < seg_len - tol - 1e-12)
      throw ValidationError("inlet segment " + std::to_string(s + 1) +
                            " is not aligned with the mesh boundary");
  }
  return mesh;
}

VecX sample_per_element(const Mesh& mesh, const std::function<Real(const Vec2&)>& f) {
  VecX v(mesh.n_triangles());
  for (int t = 0; t < mesh.n_triangles(); ++t) v[t] = f(mesh.centroid(t));
  return v;
}

void write_vtk_mesh(const Mesh& mesh, const std::string& path,
                    const std::vector<std::pair<std::string, VecX>>& cell_data,
                    const std::vector<std::pair<std::string, VecX>>& point_data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "# vtk DataFile Version 3.0\nairest mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.n_vertices() << " double\n";
  out.precision(12);
  for (const auto& v : mesh.vertices) out << v.x() << " " << v.y() << " 0\n";
  out << "CELLS " << mesh.n_triangles() << " " << 4 * mesh.n_triangles() << "\n";
  for (const auto& t : mesh.triangles) out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
  out << "CELL_TYPES " << mesh.n_triangles() << "\n";
  for (int t = 0; t < mesh.n_triangles(); ++t) out << "5\n";
  if (!cell_data.empty()) {
    out << "CELL_DATA " << mesh.n_triangles() << "\n";
    for (const auto& [name, values] : cell_data) {
      out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (int t = 0; t < mesh.n_triangles(); ++t) out << values[t] << "\n";
    }
  }
  if (!point_data.empty()) {
    out << "POINT_DATA " << mesh.n_vertices() << "\n";
    for (const auto& [name, values] : point_data) {
      if (values.size() == 2 * mesh.n_vertices()) {
        out << "VECTORS " << name << " double\n";
        for (int v = 0; v < mesh.n_vertices(); ++v)
          out << values[2 * v] << " " << values[2 * v + 1] << " 0\n";
      } else {
        out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
        for (int v = 0; v < mesh.n_vertices(); ++v) out << values[v] << "\n";
      }
    }
  }
}

}  // namespace airest
