#include <doctest.h>

#include <cmath>
#include <random>

#include "airest/fem.hpp"

using namespace airest;

namespace {

FloorPlan box_plan(Real w, Real h) {
  FloorPlan plan;
  plan.width = w;
  plan.height = h;
  plan.thermostats.push_back({Vec2(w / 2, h / 2), std::min(w, h) / 4, 0.0});
  return plan;
}

// P2 interpolation of an analytic vector field
VecX interpolate_velocity(const FemSpace& V, const std::function<Vec2(const Vec2&)>& f) {
  const Mesh& mesh = *V.mesh;
  VecX u(V.n_dofs);
  for (int v = 0; v < mesh.n_vertices(); ++v) {
    const Vec2 val = f(mesh.vertices[v]);
    u[2 * v] = val.x();
    u[2 * v + 1] = val.y();
  }
  for (int e = 0; e < mesh.n_edges(); ++e) {
    const Vec2 mid = 0.5 * (mesh.vertices[mesh.edges[e][0]] + mesh.vertices[mesh.edges[e][1]]);
    const Vec2 val = f(mid);
    const int node = mesh.n_vertices() + e;
    u[2 * node] = val.x();
    u[2 * node + 1] = val.y();
  }
  return u;
}

Real max_abs(const SpMat& A) {
  Real m = 0;
  for (int c = 0; c < A.outerSize(); ++c)
    for (SpMat::InnerIterator it(A, c); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

}  // namespace

TEST_CASE("quadrature rules integrate reference monomials exactly") {
  // int_T l0^a l1^b l2^c dx = 2A a! b! c! / (a+b+c+2)!  with A = 1/2 here
  auto factorial = [](int n) {
    Real f = 1;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
  };
  for (int degree : {1, 2, 4, 5}) {
    const QuadRule& rule = triangle_rule(degree);
    Real wsum = 0;
    for (Real w : rule.weights) wsum += w;
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-14));
    for (int a = 0; a <= degree; ++a) {
      for (int b = 0; a + b <= degree; ++b) {
        const int c = 0;
        Real quad = 0;
        for (int q = 0; q < rule.size(); ++q)
          quad += rule.weights[q] * std::pow(rule.bary[q][0], a) * std::pow(rule.bary[q][1], b);
        const Real exact =
            2.0 * factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2);
        CHECK(quad == doctest::Approx(exact).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("gauss-legendre integrates polynomials") {
  std::vector<Real> x, w;
  gauss_legendre(4, 0.0, 1.0, x, w);
  Real acc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += w[i] * std::pow(x[i], 5);
  CHECK(acc == doctest::Approx(1.0 / 6.0).epsilon(1e-13));
}

TEST_CASE("two-triangle reference mesh matches hand-computed matrices") {
  const FloorPlan plan = box_plan(1, 1);
  const Mesh mesh = generate_mesh(plan, 1.0);
  REQUIRE(mesh.n_triangles() == 2);
  const FemSpace S(mesh, SpaceKind::P1Scalar);

  // vertex order in the structured mesh: (0,0),(1,0),(0,1),(1,1)
  REQUIRE(mesh.vertices[0] == Vec2(0, 0));
  REQUIRE(mesh.vertices[1] == Vec2(1, 0));
  REQUIRE(mesh.vertices[2] == Vec2(0, 1));
  REQUIRE(mesh.vertices[3] == Vec2(1, 1));

  const SpMat M = assemble_mass(S);
  const SpMat K = assemble_diffusion(S, VecX::Ones(2));

  // hand-computed on the "\" split {(0,0),(1,0),(0,1)} + {(1,0),(1,1),(0,1)}:
  // element mass = A/12 [[2,1,1],[1,2,1],[1,1,2]], element stiffness from
  // barycentric gradients of each right triangle
  Eigen::Matrix4d Mh;
  Mh << 2, 1, 1, 0,
        1, 4, 2, 1,
        1, 2, 4, 1,
        0, 1, 1, 2;
  Mh /= 24.0;
  Eigen::Matrix4d Kh;
  Kh << 1, -0.5, -0.5, 0,
        -0.5, 1, 0, -0.5,
        -0.5, 0, 1, -0.5,
        0, -0.5, -0.5, 1;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      CHECK(M.coeff(i, j) == doctest::Approx(Mh(i, j)).epsilon(1e-12));
      CHECK(K.coeff(i, j) == doctest::Approx(Kh(i, j)).epsilon(1e-12));
    }
}

TEST_CASE("mass matrix entries sum to the domain area") {
  const FloorPlan plan = box_plan(3, 2);
  const Mesh mesh = generate_mesh(plan, 0.35);
  const FemSpace S(mesh, SpaceKind::P1Scalar);
  const SpMat M = assemble_mass(S);
  CHECK(VecX::Ones(S.n_dofs).dot(M * VecX::Ones(S.n_dofs)) ==
        doctest::Approx(6.0).epsilon(1e-10));
  CHECK(max_abs(SpMat(M - SpMat(M.transpose()))) <= 1e-15);
}

TEST_CASE("diffusion annihilates constants on interior rows") {
  const FloorPlan plan = box_plan(2, 2);
  const Mesh mesh = generate_mesh(plan, 0.3);
  const FemSpace S(mesh, SpaceKind::P1Scalar);
  const SpMat K = assemble_diffusion(S, VecX::Constant(mesh.n_triangles(), 0.37));
  const VecX r = K * VecX::Ones(S.n_dofs);
  // rows of interior nodes must vanish (boundary rows carry the flux)
  std::vector<char> on_bnd(S.n_dofs, 0);
  for (int b : S.boundary_nodes()) on_bnd[b] = 1;
  for (int i = 0; i < S.n_dofs; ++i)
    if (!on_bnd[i]) CHECK(std::abs(r[i]) <= 1e-12);
  CHECK(max_abs(SpMat(K - SpMat(K.transpose()))) <= 1e-15);
}

TEST_CASE("convection applied to a constant field vanishes") {
  const FloorPlan plan = box_plan(2, 2);
  const Mesh mesh = generate_mesh(plan, 0.25);
  const FemSpace S(mesh, SpaceKind::P1Scalar);
  const FemSpace V(mesh, SpaceKind::P2Vector);
  const VecX u = interpolate_velocity(V, [](const Vec2& x) {
    return Vec2(std::sin(x.y()), std::cos(x.x()));
  });
  const SpMat C = assemble_convection(S, V, u);
  CHECK((C * VecX::Ones(S.n_dofs)).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("vector forms on P2") {
  const FloorPlan plan = box_plan(2, 1);
  const Mesh mesh = generate_mesh(plan, 0.25);
  const FemSpace V(mesh, SpaceKind::P2Vector);
  const FemSpace P(mesh, SpaceKind::P1Pressure);

  SUBCASE("vector mass with unit coefficient integrates constants") {
    const SpMat M = assemble_vector_mass(V, VecX::Ones(mesh.n_triangles()));
    const VecX ones = VecX::Ones(V.n_dofs);
    CHECK(ones.dot(M * ones) == doctest::Approx(2.0 * 2.0).epsilon(1e-10));
  }
  SUBCASE("vector laplacian is symmetric and kills constants") {
    const SpMat K = assemble_vector_laplacian(V, 1.0 / 100.0);
    CHECK(max_abs(SpMat(K - SpMat(K.transpose()))) <= 1e-15);
    CHECK((K * VecX::Ones(V.n_dofs)).lpNorm<Eigen::Infinity>() <= 1e-13);
  }
  SUBCASE("divergence of constant and linear solenoidal fields vanishes") {
    const SpMat D = assemble_divergence(V, P);
    VecX u_const = interpolate_velocity(V, [](const Vec2&) { return Vec2(1, 0); });
    CHECK((D * u_const).norm() <= 1e-12);
    VecX u_lin = interpolate_velocity(V, [](const Vec2& x) { return Vec2(x.x(), -x.y()); });
    CHECK((D * u_lin).norm() <= 1e-12);
  }
  SUBCASE("ns linearization transposes against the reaction identity") {
    // ((v . grad) u, w) with u linear: entries finite and matrix not symmetric
    VecX u = interpolate_velocity(V, [](const Vec2& x) { return Vec2(x.y(), 0.5 * x.x()); });
    const SpMat N = assemble_ns_linearization(V, u);
    CHECK(max_abs(N) > 0);
  }
}

TEST_CASE("solve_linear basics") {
  SUBCASE("identity") {
    SpMat I(3, 3);
    I.setIdentity();
    VecX b(3);
    b << 1, 2, 3;
    CHECK((solve_linear(I, b) - b).norm() <= 1e-14);
  }
  SUBCASE("diagonal 2x2") {
    SpMat A(2, 2);
    std::vector<Triplet> t{{0, 0, 2.0}, {1, 1, 4.0}};
    A.setFromTriplets(t.begin(), t.end());
    VecX b(2);
    b << 2, 4;
    const VecX x = solve_linear(A, b);
    CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("singular matrix reports failure") {
    SpMat A(2, 2);
    std::vector<Triplet> t{{0, 0, 1.0}, {0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 1.0}};
    A.setFromTriplets(t.begin(), t.end());
    VecX b(2);
    b << 1, 1;
    CHECK_THROWS_AS(solve_linear(A, b), SolverError);
  }
}

TEST_CASE("manufactured Poisson solution converges at second order") {
  // -div(grad u) = 2 pi^2 sin(pi x) sin(pi y), u = 0 on the boundary
  auto exact = [](const Vec2& x) { return std::sin(M_PI * x.x()) * std::sin(M_PI * x.y()); };
  auto rhs = [&](const Vec2& x) { return 2.0 * M_PI * M_PI * exact(x); };
  std::vector<Real> errors;
  for (int n : {8, 16, 32}) {
    const FloorPlan plan = box_plan(1, 1);
    const Mesh mesh = generate_mesh(plan, 1.0 / n);
    const FemSpace S(mesh, SpaceKind::P1Scalar);
    SpMat K = assemble_diffusion(S, VecX::Ones(mesh.n_triangles()));
    VecX b = assemble_load(S, rhs, 5);
    const auto bnd = S.boundary_nodes();
    apply_dirichlet(K, b, bnd, VecX::Zero(static_cast<int>(bnd.size())), true);
    const VecX u = solve_linear(K, b);
    const SpMat M = assemble_mass(S);
    VecX diff(S.n_dofs);
    for (int v = 0; v < mesh.n_vertices(); ++v) diff[v] = u[v] - exact(mesh.vertices[v]);
    errors.push_back(std::sqrt(diff.dot(M * diff)));
  }
  CHECK(errors[0] / errors[1] > 3.4);  // ~2^2
  CHECK(errors[1] / errors[2] > 3.4);
}

TEST_CASE("dirichlet rows solve to their boundary values") {
  const FloorPlan plan = box_plan(1, 1);
  const Mesh mesh = generate_mesh(plan, 0.25);
  const FemSpace S(mesh, SpaceKind::P1Scalar);
  SpMat K = assemble_diffusion(S, VecX::Ones(mesh.n_triangles()));
  VecX b = VecX::Zero(S.n_dofs);
  const auto bnd = S.boundary_nodes();
  VecX vals(static_cast<int>(bnd.size()));
  for (std::size_t i = 0; i < bnd.size(); ++i)
    vals[static_cast<int>(i)] = mesh.vertices[bnd[i]].x();  // harmonic data
  for (bool symmetrize : {false, true}) {
    SpMat A = K;
    VecX rhs = b;
    apply_dirichlet(A, rhs, bnd, vals, symmetrize);
    if (symmetrize) CHECK(max_abs(SpMat(A - SpMat(A.transpose()))) <= 1e-15);
    const VecX x = solve_linear(A, rhs);
    for (std::size_t i = 0; i < bnd.size(); ++i)
      CHECK(std::abs(x[bnd[i]] - vals[static_cast<int>(i)]) <= 1e-13);
    // solution of Laplace with u = x on the boundary is u = x
    for (int v = 0; v < mesh.n_vertices(); ++v)
      CHECK(x[v] == doctest::Approx(mesh.vertices[v].x()).epsilon(1e-10));
  }
}

TEST_CASE("newton solver") {
  SUBCASE("scalar quadratic") {
    auto residual = [](const VecX& x) {
      VecX r(1);
      r[0] = x[0] * x[0] - 4.0;
      return r;
    };
    auto jacobian = [](const VecX& x) {
      SpMat J(1, 1);
      J.insert(0, 0) = 2.0 * x[0];
      return J;
    };
    NewtonOptions opts;
    opts.tol = 1e-12;
    NewtonReport rep;
    VecX x0(1);
    x0[0] = 3.0;
    const VecX x = newton_solve(residual, jacobian, x0, opts, &rep);
    CHECK(x[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(rep.converged);
  }
  SUBCASE("linear residual converges in one iteration") {
    SpMat A(2, 2);
    std::vector<Triplet> t{{0, 0, 3.0}, {0, 1, 1.0}, {1, 1, 2.0}};
    A.setFromTriplets(t.begin(), t.end());
    VecX b(2);
    b << 1, 4;
    auto residual = [&](const VecX& x) { return VecX(A * x - b); };
    auto jacobian = [&](const VecX&) { return A; };
    NewtonReport rep;
    NewtonOptions opts;
    opts.tol = 1e-12;
    const VecX x = newton_solve(residual, jacobian, VecX::Zero(2), opts, &rep);
    CHECK(rep.iterations == 1);
    CHECK((A * x - b).norm() <= 1e-12);
  }
  SUBCASE("non-convergence carries the residual norm") {
    auto residual = [](const VecX& x) {
      VecX r(1);
      r[0] = std::exp(x[0]) + 1.0;  // no root
      return r;
    };
    auto jacobian = [](const VecX& x) {
      SpMat J(1, 1);
      J.insert(0, 0) = std::exp(x[0]);
      return J;
    };
    CHECK_THROWS_AS(newton_solve(residual, jacobian, VecX::Zero(1)), SolverError);
  }
}

TEST_CASE("jacobian consistency probe: finite differences approach the jacobian") {
  // synthetic residual R(x) = A x + x .* x with J = A + 2 diag(x)
  const int n = 12;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<Real> uni(-1, 1);
  std::vector<Triplet> trips;
  for (int i = 0; i < n; ++i) {
    trips.emplace_back(i, i, 2.0 + uni(rng));
    trips.emplace_back(i, (i + 1) % n, uni(rng));
  }
  SpMat A(n, n);
  A.setFromTriplets(trips.begin(), trips.end());
  auto residual = [&](const VecX& x) { return VecX(A * x + VecX(x.array().square())); };
  auto jacobian = [&](const VecX& x) {
    SpMat J = A;
    for (int i = 0; i < n; ++i) J.coeffRef(i, i) += 2.0 * x[i];
    return J;
  };
  VecX x(n), v(n);
  for (int i = 0; i < n; ++i) {
    x[i] = uni(rng);
    v[i] = uni(rng);
  }
  const SpMat J = jacobian(x);
  Real prev = -1;
  for (Real h : {1e-4, 1e-5, 1e-6}) {
    const VecX fd = (residual(x + h * v) - residual(x)) / h;
    const Real err = (fd - J * v).norm();
    if (prev > 0) CHECK(err < prev);  // O(h) decay
    prev = err;
  }
  CHECK(prev <= 1e-5);
}
