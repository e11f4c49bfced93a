#pragma once

#include <vector>

#include "airest/types.hpp"

namespace airest {

/// Symmetric Gauss rule on the reference triangle, stored as barycentric
/// coordinates and weights that sum to one (scale by element area on use).
struct QuadRule {
  int degree = 0;
  std::vector<std::array<Real, 3>> bary;
  std::vector<Real> weights;

  int size() const { return static_cast<int>(weights.size()); }
};

/// Smallest catalogued rule integrating polynomials of the given total
/// degree exactly (supported degrees: 1..5).
const QuadRule& triangle_rule(int degree);

/// High-order Gauss-Legendre nodes/weights on [a,b] (test oracles use this).
void gauss_legendre(int n, Real a, Real b, std::vector<Real>& x, std::vector<Real>& w);

}  // namespace airest
