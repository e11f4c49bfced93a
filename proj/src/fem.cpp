#include "airest/fem.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace airest {

FemSpace::FemSpace(const Mesh& m, SpaceKind k) : kind(k), mesh(&m) {
  n_nodes = (k == SpaceKind::P2Vector) ? m.n_vertices() + m.n_edges() : m.n_vertices();
  n_dofs = is_vector() ? 2 * n_nodes : n_nodes;
}

void FemSpace::element_nodes(int t, int* out) const {
  const auto& tr = mesh->triangles[t];
  out[0] = tr[0];
  out[1] = tr[1];
  out[2] = tr[2];
  if (kind == SpaceKind::P2Vector) {
    const int nv = mesh->n_vertices();
    for (int k = 0; k < 3; ++k) out[3 + k] = nv + mesh->tri_edges[t][k];
  }
}

namespace {

int edge_index_of(const Mesh& mesh, int v0, int v1) {
  // boundary edges only, linear in the edge list the first time; cached map
  // would be overkill at these sizes
  if (v0 > v1) std::swap(v0, v1);
  for (std::size_t e = 0; e < mesh.edges.size(); ++e)
    if (mesh.edges[e][0] == v0 && mesh.edges[e][1] == v1) return static_cast<int>(e);
  throw std::logic_error("boundary edge missing from edge list");
}

}  // namespace

std::vector<int> FemSpace::boundary_nodes() const {
  std::set<int> out;
  for (const auto& be : mesh->boundary_edges) {
    out.insert(be.v0);
    out.insert(be.v1);
    if (kind == SpaceKind::P2Vector)
      out.insert(mesh->n_vertices() + edge_index_of(*mesh, be.v0, be.v1));
  }
  return {out.begin(), out.end()};
}

std::vector<int> FemSpace::boundary_nodes(BoundaryTag tag) const {
  std::set<int> out;
  for (const auto& be : mesh->boundary_edges) {
    if (be.tag != tag) continue;
    out.insert(be.v0);
    out.insert(be.v1);
    if (kind == SpaceKind::P2Vector)
      out.insert(mesh->n_vertices() + edge_index_of(*mesh, be.v0, be.v1));
  }
  return {out.begin(), out.end()};
}

std::vector<int> FemSpace::node_dofs(const std::vector<int>& nodes) const {
  if (!is_vector()) return nodes;
  std::vector<int> dofs;
  dofs.reserve(2 * nodes.size());
  for (int n : nodes) {
    dofs.push_back(2 * n);
    dofs.push_back(2 * n + 1);
  }
  return dofs;
}

void p1_basis(const std::array<Real, 3>& b, Real N[3]) {
  N[0] = b[0];
  N[1] = b[1];
  N[2] = b[2];
}

void p1_grads(const Mat2& inv_jac_t, Vec2 G[3]) {
  G[1] = inv_jac_t.col(0);
  G[2] = inv_jac_t.col(1);
  G[0] = -G[1] - G[2];
}

void p2_basis(const std::array<Real, 3>& b, Real N[6]) {
  for (int i = 0; i < 3; ++i) N[i] = b[i] * (2.0 * b[i] - 1.0);
  N[3] = 4.0 * b[1] * b[2];
  N[4] = 4.0 * b[2] * b[0];
  N[5] = 4.0 * b[0] * b[1];
}

void p2_grads(const std::array<Real, 3>& b, const Mat2& inv_jac_t, Vec2 G[6]) {
  Vec2 L[3];
  p1_grads(inv_jac_t, L);
  for (int i = 0; i < 3; ++i) G[i] = (4.0 * b[i] - 1.0) * L[i];
  G[3] = 4.0 * (b[2] * L[1] + b[1] * L[2]);
  G[4] = 4.0 * (b[0] * L[2] + b[2] * L[0]);
  G[5] = 4.0 * (b[1] * L[0] + b[0] * L[1]);
}

Vec2 eval_velocity(const FemSpace& V, const VecX& u, int t, const std::array<Real, 3>& bary) {
  int nodes[6];
  V.element_nodes(t, nodes);
  Real N[6];
  p2_basis(bary, N);
  Vec2 val(0, 0);
  for (int k = 0; k < 6; ++k) {
    val.x() += N[k] * u[2 * nodes[k]];
    val.y() += N[k] * u[2 * nodes[k] + 1];
  }
  return val;
}

Mat2 eval_velocity_gradient(const FemSpace& V, const VecX& u, int t,
                            const std::array<Real, 3>& bary) {
  int nodes[6];
  V.element_nodes(t, nodes);
  Vec2 G[6];
  p2_grads(bary, V.mesh->inv_jac_t[t], G);
  Mat2 g = Mat2::Zero();  // g(a,b) = d u_a / d x_b
  for (int k = 0; k < 6; ++k) {
    g.row(0) += u[2 * nodes[k]] * G[k].transpose();
    g.row(1) += u[2 * nodes[k] + 1] * G[k].transpose();
  }
  return g;
}

Vec2 eval_p1_gradient(const FemSpace& S, const VecX& f, int t) {
  const auto& tr = S.mesh->triangles[t];
  Vec2 G[3];
  p1_grads(S.mesh->inv_jac_t[t], G);
  return f[tr[0]] * G[0] + f[tr[1]] * G[1] + f[tr[2]] * G[2];
}

namespace {

SpMat from_triplets(int rows, int cols, std::vector<Triplet>& trips) {
  SpMat A(rows, cols);
  A.setFromTriplets(trips.begin(), trips.end());
  A.makeCompressed();
  return A;
}

void require_scalar(const FemSpace& S, const char* where) {
  if (S.is_vector()) throw std::invalid_argument(std::string(where) + ": scalar space required");
}

void require_vector(const FemSpace& V, const char* where) {
  if (!V.is_vector()) throw std::invalid_argument(std::string(where) + ": vector space required");
}

}  // namespace

SpMat assemble_mass(const FemSpace& S) {
  require_scalar(S, "assemble_mass");
  const Mesh& mesh = *S.mesh;
  const QuadRule& rule = triangle_rule(2);
  std::vector<Triplet> trips;
  trips.reserve(9 * mesh.n_triangles());
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tr = mesh.triangles[t];
    Real M[3][3] = {};
    for (int q = 0; q < rule.size(); ++q) {
      const Real w = rule.weights[q] * mesh.tri_area[t];
      Real N[3];
      p1_basis(rule.bary[q], N);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) M[i][j] += w * N[i] * N[j];
    }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) trips.emplace_back(tr[i], tr[j], M[i][j]);
  }
  return from_triplets(S.n_dofs, S.n_dofs, trips);
}

SpMat assemble_diffusion(const FemSpace& S, const VecX& kappa_elem) {
  require_scalar(S, "assemble_diffusion");
  const Mesh& mesh = *S.mesh;
  if (kappa_elem.size() != mesh.n_triangles())
    throw std::invalid_argument("assemble_diffusion: kappa size mismatch");
  std::vector<Triplet> trips;
  trips.reserve(9 * mesh.n_triangles());
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tr = mesh.triangles[t];
    Vec2 G[3];
    p1_grads(mesh.inv_jac_t[t], G);
    const Real c = kappa_elem[t] * mesh.tri_area[t];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) trips.emplace_back(tr[i], tr[j], c * G[i].dot(G[j]));
  }
  return from_triplets(S.n_dofs, S.n_dofs, trips);
}

SpMat assemble_convection(const FemSpace& S, const FemSpace& V, const VecX& u) {
  require_scalar(S, "assemble_convection");
  require_vector(V, "assemble_convection");
  if (S.mesh != V.mesh) throw std::invalid_argument("assemble_convection: mesh mismatch");
  const Mesh& mesh = *S.mesh;
  const QuadRule& rule = triangle_rule(4);  // P2 * const-grad * P1
  std::vector<Triplet> trips;
  trips.reserve(9 * mesh.n_triangles());
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tr = mesh.triangles[t];
    Vec2 G[3];
    p1_grads(mesh.inv_jac_t[t], G);
    Real C[3][3] = {};
    for (int q = 0; q < rule.size(); ++q) {
      const Real w = rule.weights[q] * mesh.tri_area[t];
      const Vec2 uq = eval_velocity(V, u, t, rule.bary[q]);
      Real N[3];
      p1_basis(rule.bary[q], N);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) C[i][j] += w * N[i] * uq.dot(G[j]);
    }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) trips.emplace_back(tr[i], tr[j], C[i][j]);
  }
  return from_triplets(S.n_dofs, S.n_dofs, trips);
}

SpMat assemble_vector_mass(const FemSpace& V, const VecX& coef_elem) {
  require_vector(V, "assemble_vector_mass");
  const Mesh& mesh = *V.mesh;
  if (coef_elem.size() != mesh.n_triangles())
    throw std::invalid_argument("assemble_vector_mass: coefficient size mismatch");
  const QuadRule& rule = triangle_rule(4);
  std::vector<Triplet> trips;
  trips.reserve(72 * mesh.n_triangles());
  int nodes[6];
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    if (coef_elem[t] == 0.0) continue;
    V.element_nodes(t, nodes);
    Real M[6][6] = {};
    for (int q = 0; q < rule.size(); ++q) {
      const Real w = rule.weights[q] * mesh.tri_area[t] * coef_elem[t];
      Real N[6];
      p2_basis(rule.bary[q], N);
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) M[i][j] += w * N[i] * N[j];
    }
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        for (int c = 0; c < 2; ++c)
          trips.emplace_back(2 * nodes[i] + c, 2 * nodes[j] + c, M[i][j]);
  }
  return from_triplets(V.n_dofs, V.n_dofs, trips);
}

SpMat assemble_vector_laplacian(const FemSpace& V, Real coef) {
  require_vector(V, "assemble_vector_laplacian");
  const Mesh& mesh = *V.mesh;
  const QuadRule& rule = triangle_rule(2);  // P2 gradients are linear
  std::vector<Triplet> trips;
  trips.reserve(72 * mesh.n_triangles());
  int nodes[6];
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    V.element_nodes(t, nodes);
    Real K[6][6] = {};
    for (int q = 0; q < rule.size(); ++q) {
      const Real w = rule.weights[q] * mesh.tri_area[t] * coef;
      Vec2 G[6];
      p2_grads(rule.bary[q], mesh.inv_jac_t[t], G);
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) K[i][j] += w * G[i].dot(G[j]);
    }
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        for (int c = 0; c < 2; ++c)
          trips.emplace_back(2 * nodes[i] + c, 2 * nodes[j] + c, K[i][j]);
  }
  return from_triplets(V.n_dofs, V.n_dofs, trips);
}

SpMat assemble_ns_convection(const FemSpace& V, const VecX& u) {
  require_vector(V, "assemble_ns_convection");
  const Mesh& mesh = *V.mesh;
  const QuadRule& rule = triangle_rule(5);  // u(P2) * gradN(P1) * N(P2)
  std::vector<Triplet> trips;
  trips.reserve(72 * mesh.n_triangles());
  int nodes[6];
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    V.element_nodes(t, nodes);
    Real C[6][6] = {};
    for (int q = 0; q < rule.size(); ++q) {
      const Real w = rule.weights[q] * mesh.tri_area[t];
      const Vec2 uq = eval_velocity(V, u, t, rule.bary[q]);
      Real N[6];
      Vec2 G[6];
      p2_basis(rule.bary[q], N);
      p2_grads(rule.bary[q], mesh.inv_jac_t[t], G);
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) C[i][j] += w * N[i] * uq.dot(G[j]);
    }
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        for (int c = 0; c < 2; ++c)
          trips.emplace_back(2 * nodes[i] + c, 2 * nodes[j] + c, C[i][j]);
  }
  return from_triplets(V.n_dofs, V.n_dofs, trips);
}

SpMat assemble_ns_linearization(const FemSpace& V, const VecX& u) {
  require_vector(V, "assemble_ns_linearization");
  const Mesh& mesh = *V.mesh;
  const QuadRule& rule = triangle_rule(5);
  std::vector<Triplet> trips;
  trips.reserve(144 * mesh.n_triangles());
  int nodes[6];
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    V.element_nodes(t, nodes);
    // entry[(i,a),(j,b)] = int N_i N_j (du_a/dx_b)
    Real S[6][6] = {};
    Mat2 GU[7];  // per quadrature point velocity gradient (max rule size 7)
    for (int q = 0; q < rule.size(); ++q)
      GU[q] = eval_velocity_gradient(V, u, t, rule.bary[q]);
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        for (int i = 0; i < 6; ++i)
          for (int j = 0; j < 6; ++j) S[i][j] = 0.0;
        for (int q = 0; q < rule.size(); ++q) {
          const Real w = rule.weights[q] * mesh.tri_area[t] * GU[q](a, b);
          Real N[6];
          p2_basis(rule.bary[q], N);
          for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) S[i][j] += w * N[i] * N[j];
        }
        for (int i = 0; i < 6; ++i)
          for (int j = 0; j < 6; ++j)
            trips.emplace_back(2 * nodes[i] + a, 2 * nodes[j] + b, S[i][j]);
      }
    }
  }
  return from_triplets(V.n_dofs, V.n_dofs, trips);
}

SpMat assemble_divergence(const FemSpace& V, const FemSpace& P) {
  require_vector(V, "assemble_divergence");
  require_scalar(P, "assemble_divergence");
  if (V.mesh != P.mesh) throw std::invalid_argument("assemble_divergence: mesh mismatch");
  const Mesh& mesh = *V.mesh;
  const QuadRule& rule = triangle_rule(2);
  std::vector<Triplet> trips;
  trips.reserve(36 * mesh.n_triangles());
  int nodes[6];
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    V.element_nodes(t, nodes);
    const auto& tr = mesh.triangles[t];
    Real D[3][12] = {};
    for (int q = 0; q < rule.size(); ++q) {
      const Real w = rule.weights[q] * mesh.tri_area[t];
      Real Np[3];
      Vec2 G[6];
      p1_basis(rule.bary[q], Np);
      p2_grads(rule.bary[q], mesh.inv_jac_t[t], G);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 6; ++j)
          for (int b = 0; b < 2; ++b) D[i][2 * j + b] += w * Np[i] * G[j][b];
    }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 6; ++j)
        for (int b = 0; b < 2; ++b)
          trips.emplace_back(tr[i], 2 * nodes[j] + b, D[i][2 * j + b]);
  }
  return from_triplets(P.n_dofs, V.n_dofs, trips);
}

VecX assemble_load(const FemSpace& S, const std::function<Real(const Vec2&)>& f, int degree) {
  require_scalar(S, "assemble_load");
  const Mesh& mesh = *S.mesh;
  const QuadRule& rule = triangle_rule(degree);
  VecX b = VecX::Zero(S.n_dofs);
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tr = mesh.triangles[t];
    for (int q = 0; q < rule.size(); ++q) {
      const auto& bc = rule.bary[q];
      const Vec2 x = bc[0] * mesh.vertices[tr[0]] + bc[1] * mesh.vertices[tr[1]] +
                     bc[2] * mesh.vertices[tr[2]];
      const Real w = rule.weights[q] * mesh.tri_area[t] * f(x);
      for (int i = 0; i < 3; ++i) b[tr[i]] += w * bc[i];
    }
  }
  return b;
}

VecX assemble_load_per_element(const FemSpace& S, const VecX& f_elem) {
  require_scalar(S, "assemble_load_per_element");
  const Mesh& mesh = *S.mesh;
  if (f_elem.size() != mesh.n_triangles())
    throw std::invalid_argument("assemble_load_per_element: size mismatch");
  VecX b = VecX::Zero(S.n_dofs);
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tr = mesh.triangles[t];
    const Real w = f_elem[t] * mesh.tri_area[t] / 3.0;
    for (int i = 0; i < 3; ++i) b[tr[i]] += w;
  }
  return b;
}

VecX assemble_vector_load_per_element(const FemSpace& V, const std::vector<Vec2>& g_elem) {
  require_vector(V, "assemble_vector_load_per_element");
  const Mesh& mesh = *V.mesh;
  if (static_cast<int>(g_elem.size()) != mesh.n_triangles())
    throw std::invalid_argument("assemble_vector_load_per_element: size mismatch");
  const QuadRule& rule = triangle_rule(2);
  VecX b = VecX::Zero(V.n_dofs);
  int nodes[6];
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    if (g_elem[t].squaredNorm() == 0.0) continue;
    V.element_nodes(t, nodes);
    for (int q = 0; q < rule.size(); ++q) {
      const Real w = rule.weights[q] * mesh.tri_area[t];
      Real N[6];
      p2_basis(rule.bary[q], N);
      for (int i = 0; i < 6; ++i) {
        b[2 * nodes[i]] += w * N[i] * g_elem[t].x();
        b[2 * nodes[i] + 1] += w * N[i] * g_elem[t].y();
      }
    }
  }
  return b;
}

void apply_dirichlet(SpMat& A, VecX& b, const std::vector<int>& dofs, const VecX& values,
                     bool symmetrize) {
  if (static_cast<int>(dofs.size()) != values.size())
    throw std::invalid_argument("apply_dirichlet: dofs/values size mismatch");
  std::vector<char> constrained(A.rows(), 0);
  VecX bc_val = VecX::Zero(A.rows());
  for (std::size_t k = 0; k < dofs.size(); ++k) {
    constrained[dofs[k]] = 1;
    bc_val[dofs[k]] = values[k];
  }
  if (symmetrize) b -= A * bc_val;
  for (int col = 0; col < A.outerSize(); ++col) {
    for (SpMat::InnerIterator it(A, col); it; ++it) {
      if (constrained[it.row()] || (symmetrize && constrained[col])) it.valueRef() = 0.0;
    }
  }
  for (std::size_t k = 0; k < dofs.size(); ++k) {
    A.coeffRef(dofs[k], dofs[k]) = 1.0;
    b[dofs[k]] = values[k];
  }
  A.makeCompressed();
}

void apply_dirichlet_zero(SpMat& A, VecX& b, const std::vector<int>& dofs) {
  apply_dirichlet(A, b, dofs, VecX::Zero(static_cast<int>(dofs.size())), false);
}

SparseFactor::SparseFactor() = default;
SparseFactor::SparseFactor(SparseFactor&&) noexcept = default;
SparseFactor& SparseFactor::operator=(SparseFactor&&) noexcept = default;
SparseFactor::~SparseFactor() = default;

void SparseFactor::factorize(const SpMat& A) {
  lu_ = std::make_unique<Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>>>();
  lu_->analyzePattern(A);
  lu_->factorize(A);
  if (lu_->info() != Eigen::Success) {
    ready_ = false;
    throw SolverError("sparse factorization failed: " + lu_->lastErrorMessage());
  }
  ready_ = true;
  factor_bytes_ = static_cast<std::size_t>(lu_->nnzL() + lu_->nnzU()) * 12 +
                  static_cast<std::size_t>(A.rows()) * 16;
}

VecX SparseFactor::solve(const VecX& b) const {
  if (!ready_) throw SolverError("SparseFactor::solve called before factorize");
  return lu_->solve(b);
}

namespace {

Real matrix_inf_norm(const SpMat& A) {
  VecX row_sums = VecX::Zero(A.rows());
  for (int col = 0; col < A.outerSize(); ++col)
    for (SpMat::InnerIterator it(A, col); it; ++it) row_sums[it.row()] += std::abs(it.value());
  return row_sums.size() ? row_sums.maxCoeff() : 0.0;
}

}  // namespace

VecX solve_linear(const SpMat& A, const VecX& b) {
  if (A.rows() != A.cols()) throw std::invalid_argument("solve_linear: matrix not square");
  if (A.rows() != b.size()) throw std::invalid_argument("solve_linear: rhs size mismatch");
  SparseFactor f;
  f.factorize(A);
  VecX x = f.solve(b);
  const Real norm_a = matrix_inf_norm(A);
  auto bound = [&](const VecX& xx) { return 1e-10 * (norm_a * xx.norm() + b.norm()); };
  VecX r = b - A * x;
  for (int refine = 0; refine < 2 && r.norm() > bound(x); ++refine) {
    x += f.solve(r);
    r = b - A * x;
  }
  if (r.norm() > bound(x))
    throw SolverError("solve_linear: residual " + std::to_string(r.norm()) +
                      " exceeds contract");
  return x;
}

VecX newton_solve(const std::function<VecX(const VecX&)>& residual,
                  const std::function<SpMat(const VecX&)>& jacobian, VecX x,
                  const NewtonOptions& opts, NewtonReport* report) {
  VecX r = residual(x);
  Real rnorm = r.norm();
  int iter = 0;
  while (rnorm > opts.tol) {
    if (iter >= opts.max_iter)
      throw SolverError("newton_solve: no convergence after " + std::to_string(opts.max_iter) +
                        " iterations, residual " + std::to_string(rnorm));
    SpMat J = jacobian(x);
    SparseFactor f;
    f.factorize(J);
    const VecX step = f.solve(-r);
    Real s = 1.0;
    VecX best_x;
    VecX best_r;
    Real best_norm = std::numeric_limits<Real>::infinity();
    for (int h = 0; h <= opts.max_halvings; ++h) {
      VecX xt = x + s * step;
      VecX rt = residual(xt);
      const Real nt = rt.norm();
      if (nt < best_norm) {
        best_norm = nt;
        best_x = std::move(xt);
        best_r = std::move(rt);
      }
      if (nt < rnorm) break;
      s *= 0.5;
    }
    if (!(best_norm < rnorm))
      throw SolverError("newton_solve: stalled at residual " + std::to_string(rnorm) +
                        " (no damped step reduced it)");
    x = std::move(best_x);
    r = std::move(best_r);
    rnorm = best_norm;
    ++iter;
  }
  if (report) {
    report->iterations = iter;
    report->residual_norm = rnorm;
    report->converged = true;
  }
  return x;
}

}  // namespace airest
