#include "airest/quadrature.hpp"

#include <cmath>

namespace airest {

namespace {

QuadRule make_rule(int degree) {
  QuadRule r;
  r.degree = degree;
  switch (degree) {
    case 1:
      r.bary = {{{1.0 / 3, 1.0 / 3, 1.0 / 3}}};
      r.weights = {1.0};
      break;
    case 2: {
      const Real a = 2.0 / 3, b = 1.0 / 6;
      r.bary = {{{a, b, b}}, {{b, a, b}}, {{b, b, a}}};
      r.weights = {1.0 / 3, 1.0 / 3, 1.0 / 3};
      break;
    }
    case 3:
    case 4: {
      // 6-point Dunavant rule, exact to degree 4
      const Real a1 = 0.108103018168070, b1 = 0.445948490915965;
      const Real a2 = 0.816847572980459, b2 = 0.091576213509771;
      const Real w1 = 0.223381589678011, w2 = 0.109951743655322;
      r.bary = {{{a1, b1, b1}}, {{b1, a1, b1}}, {{b1, b1, a1}},
                {{a2, b2, b2}}, {{b2, a2, b2}}, {{b2, b2, a2}}};
      r.weights = {w1, w1, w1, w2, w2, w2};
      r.degree = 4;
      break;
    }
    default: {
      // 7-point Dunavant rule, exact to degree 5
      const Real a1 = 0.059715871789770, b1 = 0.470142064105115;
      const Real a2 = 0.797426985353087, b2 = 0.101286507323456;
      const Real w0 = 0.225;
      const Real w1 = 0.132394152788506, w2 = 0.125939180544827;
      r.bary = {{{1.0 / 3, 1.0 / 3, 1.0 / 3}},
                {{a1, b1, b1}}, {{b1, a1, b1}}, {{b1, b1, a1}},
                {{a2, b2, b2}}, {{b2, a2, b2}}, {{b2, b2, a2}}};
      r.weights = {w0, w1, w1, w1, w2, w2, w2};
      r.degree = 5;
      break;
    }
  }
  return r;
}

}  // namespace

const QuadRule& triangle_rule(int degree) {
  static const QuadRule deg1 = make_rule(1);
  static const QuadRule deg2 = make_rule(2);
  static const QuadRule deg4 = make_rule(4);
  static const QuadRule deg5 = make_rule(5);
  if (degree <= 1) return deg1;
  if (degree <= 2) return deg2;
  if (degree <= 4) return deg4;
  return deg5;
}

void gauss_legendre(int n, Real a, Real b, std::vector<Real>& x, std::vector<Real>& w) {
  // Newton iteration on Legendre polynomials, nodes on [-1,1] then mapped.
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    Real z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    Real pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      Real p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        Real p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      Real dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    const Real xm = 0.5 * (b + a), xl = 0.5 * (b - a);
    x[i] = xm - xl * z;
    x[n - 1 - i] = xm + xl * z;
    w[i] = 2.0 * xl / ((1.0 - z * z) * pp * pp);
    w[n - 1 - i] = w[i];
  }
}

}  // namespace airest
