#pragma once

#include <Eigen/SparseLU>

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include "airest/mesh.hpp"
#include "airest/quadrature.hpp"
#include "airest/types.hpp"

namespace airest {

enum class SpaceKind { P1Scalar, P2Vector, P1Pressure };

/// Finite element space on a mesh. P1 places one dof per vertex; P2 adds one
/// per edge. Vector spaces interleave components: dof = 2*node + component.
class FemSpace {
 public:
  FemSpace() = default;
  FemSpace(const Mesh& mesh, SpaceKind kind);

  SpaceKind kind = SpaceKind::P1Scalar;
  const Mesh* mesh = nullptr;
  int n_nodes = 0;  // scalar nodes
  int n_dofs = 0;   // n_nodes (scalar) or 2*n_nodes (vector)

  bool is_vector() const { return kind == SpaceKind::P2Vector; }
  int nodes_per_element() const { return kind == SpaceKind::P2Vector ? 6 : 3; }
  int dofs_per_element() const { return is_vector() ? 12 : 3; }

  /// Scalar node indices of element t (3 for P1, 6 for P2 in the order
  /// v0,v1,v2,m12,m20,m01).
  void element_nodes(int t, int* out) const;

  /// Nodes lying on boundary edges with the given tag (or on any boundary
  /// edge if tag is not given). For vector spaces use node_dofs to expand.
  std::vector<int> boundary_nodes() const;
  std::vector<int> boundary_nodes(BoundaryTag tag) const;

  /// Expands scalar node ids to dof ids (identity for scalar spaces).
  std::vector<int> node_dofs(const std::vector<int>& nodes) const;
};

/// Coefficient vector tied to its space.
struct Field {
  const FemSpace* space = nullptr;
  VecX coeffs;
};

// -- basis evaluation (shared by assembly, flow, adjoint) --------------------

void p1_basis(const std::array<Real, 3>& bary, Real N[3]);
void p1_grads(const Mat2& inv_jac_t, Vec2 G[3]);
void p2_basis(const std::array<Real, 3>& bary, Real N[6]);
void p2_grads(const std::array<Real, 3>& bary, const Mat2& inv_jac_t, Vec2 G[6]);

/// Velocity value at a barycentric point of element t for P2 vector coeffs.
Vec2 eval_velocity(const FemSpace& V, const VecX& u, int t, const std::array<Real, 3>& bary);
/// Velocity gradient (d u_i / d x_j) at a barycentric point of element t.
Mat2 eval_velocity_gradient(const FemSpace& V, const VecX& u, int t,
                            const std::array<Real, 3>& bary);
/// Gradient of a P1 scalar field on element t (constant per element).
Vec2 eval_p1_gradient(const FemSpace& S, const VecX& f, int t);

// -- catalogued bilinear forms -----------------------------------------------

/// (phi_j, phi_i) on a P1 scalar space.
SpMat assemble_mass(const FemSpace& S);
/// (kappa grad phi_j, grad phi_i) with per-element kappa.
SpMat assemble_diffusion(const FemSpace& S, const VecX& kappa_elem);
/// (u . grad phi_j, phi_i) on a P1 scalar space, u a P2 vector field.
SpMat assemble_convection(const FemSpace& S, const FemSpace& V, const VecX& u);
/// (c phi_j, phi_i) on the P2 vector space with per-element c (Brinkman term).
SpMat assemble_vector_mass(const FemSpace& V, const VecX& coef_elem);
/// coef * (grad phi_j : grad phi_i) on the P2 vector space.
SpMat assemble_vector_laplacian(const FemSpace& V, Real coef);
/// ((u . grad) phi_j, phi_i) on the P2 vector space (fixed transport field u).
SpMat assemble_ns_convection(const FemSpace& V, const VecX& u);
/// ((phi_j . grad) u, phi_i) on the P2 vector space (Newton linearization).
SpMat assemble_ns_linearization(const FemSpace& V, const VecX& u);
/// (div phi_j, q_i): rows in the pressure space, columns in the velocity space.
SpMat assemble_divergence(const FemSpace& V, const FemSpace& P);

// -- load vectors -------------------------------------------------------------

/// (f, phi_i) via the rule of the given degree.
VecX assemble_load(const FemSpace& S, const std::function<Real(const Vec2&)>& f,
                   int degree = 5);
/// (f, phi_i) with per-element-constant f.
VecX assemble_load_per_element(const FemSpace& S, const VecX& f_elem);
/// (g, v) on the P2 vector space with per-element-constant vector g.
VecX assemble_vector_load_per_element(const FemSpace& V, const std::vector<Vec2>& g_elem);

// -- boundary conditions ------------------------------------------------------

/// Row replacement: row d becomes identity with rhs value. With symmetrize,
/// columns are eliminated into the rhs as well (keeps symmetric matrices
/// symmetric; only valid when the values of all constrained dofs are given).
void apply_dirichlet(SpMat& A, VecX& b, const std::vector<int>& dofs, const VecX& values,
                     bool symmetrize = false);
void apply_dirichlet_zero(SpMat& A, VecX& b, const std::vector<int>& dofs);

// -- linear and nonlinear solves ----------------------------------------------

/// Reusable sparse LU factorization. Movable, not copyable.
class SparseFactor {
 public:
  SparseFactor();
  SparseFactor(SparseFactor&&) noexcept;
  SparseFactor& operator=(SparseFactor&&) noexcept;
  ~SparseFactor();

  void factorize(const SpMat& A);
  VecX solve(const VecX& b) const;
  bool ready() const { return ready_; }
  /// Approximate bytes held by the factors (for memory accounting).
  std::size_t factor_bytes() const { return factor_bytes_; }

 private:
  std::unique_ptr<Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>>> lu_;
  std::size_t factor_bytes_ = 0;
  bool ready_ = false;
};

/// Direct solve with residual contract ||Ax-b|| <= 1e-10 (||A|| ||x|| + ||b||);
/// applies one refinement step if needed, throws SolverError otherwise.
VecX solve_linear(const SpMat& A, const VecX& b);

struct NewtonOptions {
  Real tol = 1e-9;       // absolute tolerance on the residual norm
  int max_iter = 30;
  int max_halvings = 8;  // step damping
};

struct NewtonReport {
  int iterations = 0;
  Real residual_norm = 0.0;
  bool converged = false;
};

/// Damped Newton iteration on residual(x) = 0. Throws SolverError carrying
/// the last residual norm on non-convergence.
VecX newton_solve(const std::function<VecX(const VecX&)>& residual,
                  const std::function<SpMat(const VecX&)>& jacobian, VecX x0,
                  const NewtonOptions& opts = {}, NewtonReport* report = nullptr);

}  // namespace airest
