#include "airest/flow.hpp"

#include <cmath>
#include <sstream>

namespace airest {

FlowProblem make_flow_problem(const FemSpace& V, const FemSpace& P, Real Re, VecX alpha_elem,
                              VecX g_force, bool has_inlet) {
  if ((alpha_elem.array() < 0).any())
    throw ValidationError("flow problem: alpha must be nonnegative");
  if (!(Re > 0)) throw ValidationError("flow problem: Re must be positive");
  FlowProblem pb;
  pb.V = &V;
  pb.P = &P;
  pb.laplacian = std::make_shared<SpMat>(assemble_vector_laplacian(V, 1.0));
  pb.divergence = std::make_shared<SpMat>(assemble_divergence(V, P));
  pb.alpha_elem = std::move(alpha_elem);
  pb.g_force = std::move(g_force);
  pb.Re = Re;
  pb.wall_dofs = V.node_dofs(V.boundary_nodes(BoundaryTag::Wall));
  pb.pressure_pin = has_inlet ? -1 : 0;
  return pb;
}

SpMat saddle_matrix(const SpMat& A, const SpMat& D, Real grad_sign) {
  const int nu = static_cast<int>(A.rows());
  const int np = static_cast<int>(D.rows());
  std::vector<Triplet> trips;
  trips.reserve(A.nonZeros() + 2 * D.nonZeros());
  for (int col = 0; col < A.outerSize(); ++col)
    for (SpMat::InnerIterator it(A, col); it; ++it)
      trips.emplace_back(static_cast<int>(it.row()), col, it.value());
  for (int col = 0; col < D.outerSize(); ++col) {
    for (SpMat::InnerIterator it(D, col); it; ++it) {
      trips.emplace_back(nu + static_cast<int>(it.row()), col, it.value());
      trips.emplace_back(col, nu + static_cast<int>(it.row()), grad_sign * it.value());
    }
  }
  SpMat S(nu + np, nu + np);
  S.setFromTriplets(trips.begin(), trips.end());
  S.makeCompressed();
  return S;
}

namespace {

struct FlowWork {
  const FlowProblem* pb;
  Real Re;
  SpMat brinkman;
  int nu, np;
  std::vector<int> fixed;  // wall dofs plus optional pressure pin, composite indices

  FlowWork(const FlowProblem& p, Real re) : pb(&p), Re(re) {
    brinkman = assemble_vector_mass(*p.V, p.alpha_elem);
    nu = p.V->n_dofs;
    np = p.P->n_dofs;
    fixed = p.wall_dofs;
    if (p.pressure_pin >= 0) fixed.push_back(nu + p.pressure_pin);
  }

  VecX residual(const VecX& x) const {
    const VecX u = x.head(nu);
    const VecX p = x.tail(np);
    const SpMat C = assemble_ns_convection(*pb->V, u);
    VecX r(nu + np);
    r.head(nu) = (1.0 / Re) * ((*pb->laplacian) * u) + brinkman * u + C * u +
                 (-1.0) * (pb->divergence->transpose() * p) - pb->g_force;
    r.tail(np) = (*pb->divergence) * u;
    for (int d : fixed) r[d] = x[d];
    return r;
  }

  SpMat jacobian(const VecX& x) const {
    const VecX u = x.head(nu);
    SpMat A = (1.0 / Re) * (*pb->laplacian);
    A += brinkman;
    A += assemble_ns_convection(*pb->V, u);
    A += assemble_ns_linearization(*pb->V, u);
    SpMat J = saddle_matrix(A, *pb->divergence, -1.0);
    VecX dummy = VecX::Zero(J.rows());
    apply_dirichlet_zero(J, dummy, fixed);
    return J;
  }

  VecX stokes_start() const {
    SpMat A = (1.0 / Re) * (*pb->laplacian);
    A += brinkman;
    SpMat S = saddle_matrix(A, *pb->divergence, -1.0);
    VecX b(nu + np);
    b.head(nu) = pb->g_force;
    b.tail(np).setZero();
    apply_dirichlet_zero(S, b, fixed);
    return solve_linear(S, b);
  }
};

FlowSolution run_newton(const FlowProblem& problem, Real Re, const FlowSolution* warm,
                        const NewtonOptions& opts) {
  FlowWork work(problem, Re);
  VecX x0;
  if (warm && warm->u.size() == work.nu && warm->p.size() == work.np) {
    x0.resize(work.nu + work.np);
    x0.head(work.nu) = warm->u;
    x0.tail(work.np) = warm->p;
  } else {
    x0 = work.stokes_start();
  }
  NewtonReport report;
  const VecX x = newton_solve([&](const VecX& v) { return work.residual(v); },
                              [&](const VecX& v) { return work.jacobian(v); }, x0, opts, &report);
  FlowSolution sol;
  sol.u = x.head(work.nu);
  sol.p = x.tail(work.np);
  for (int d : problem.wall_dofs) sol.u[d] = 0.0;
  sol.theta_used = problem.theta;
  sol.residual_norm = report.residual_norm;
  sol.newton_iterations = report.iterations;
  return sol;
}

}  // namespace

FlowSolution solve_flow(const FlowProblem& problem, const FlowSolution* warm) {
  NewtonOptions opts;
  opts.tol = 1e-9;
  try {
    return run_newton(problem, problem.Re, warm, opts);
  } catch (const SolverError& direct_err) {
    std::vector<Real> steps;
    for (Real f : {0.1, 0.3, 0.6, 1.0}) steps.push_back(problem.Re * f);
    try {
      return reynolds_continuation(problem, steps);
    } catch (const SolverError& cont_err) {
      throw SolverError(std::string("solve_flow failed; direct: ") + direct_err.what() +
                        "; continuation: " + cont_err.what());
    }
  }
}

FlowSolution reynolds_continuation(const FlowProblem& problem, const std::vector<Real>& steps) {
  if (steps.empty()) throw ValidationError("reynolds_continuation: empty step list");
  for (std::size_t i = 1; i < steps.size(); ++i)
    if (steps[i] <= steps[i - 1])
      throw ValidationError("reynolds_continuation: steps must be increasing");
  if (std::abs(steps.back() - problem.Re) > 1e-12 * problem.Re)
    throw ValidationError("reynolds_continuation: last step must equal problem.Re");
  NewtonOptions opts;
  opts.tol = 1e-9;
  FlowSolution sol;
  bool have = false;
  for (Real re : steps) {
    try {
      sol = run_newton(problem, re, have ? &sol : nullptr, opts);
      have = true;
    } catch (const SolverError& e) {
      std::ostringstream os;
      os << "reynolds_continuation: failed at Re=" << re << ": " << e.what();
      throw SolverError(os.str());
    }
  }
  return sol;
}

Real divergence_norm(const FlowProblem& problem, const FlowSolution& flow) {
  return ((*problem.divergence) * flow.u).norm();
}

Real mean_speed(const FemSpace& V, const VecX& u, const Rect& region) {
  const Mesh& mesh = *V.mesh;
  const QuadRule& rule = triangle_rule(4);
  Real integral = 0, area = 0;
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    if (!region.contains(mesh.centroid(t))) continue;
    area += mesh.tri_area[t];
    for (int q = 0; q < rule.size(); ++q)
      integral +=
          rule.weights[q] * mesh.tri_area[t] * eval_velocity(V, u, t, rule.bary[q]).norm();
  }
  if (area == 0) return 0.0;
  return integral / area;
}

}  // namespace airest
