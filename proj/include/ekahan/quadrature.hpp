#pragma once

#include <vector>

namespace ekahan {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// m-point Gauss-Legendre rule on [0, 1]; exact for polynomials of degree 2m-1.
QuadratureRule gauss_legendre(int m);

/// Same rule, computed once per m and kept for the lifetime of the program.
const QuadratureRule& gauss_legendre_cached(int m);

}  // namespace ekahan
