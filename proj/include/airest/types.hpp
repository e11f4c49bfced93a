#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <stdexcept>
#include <string>

namespace airest {

using Real = double;
using Vec2 = Eigen::Vector2d;
using VecX = Eigen::VectorXd;
using Mat2 = Eigen::Matrix2d;
using SpMat = Eigen::SparseMatrix<Real>;
using Triplet = Eigen::Triplet<Real>;

/// Thrown when an input file or argument fails validation; the message names
/// the violated invariant.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when a solver fails to meet its contract (singular system,
/// non-convergence).
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace airest
