#pragma once

// Hand-rolled generators and reference computations shared by the tests.

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <vector>

#include "ekahan/linalg.hpp"
#include "ekahan/polynomial.hpp"
#include "ekahan/system.hpp"

namespace testing {

using ekahan::Index;
using ekahan::Matrix;
using ekahan::Vector;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo = -1.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  Index index(Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng_); }

  Vector vector(Index n, double scale = 1.0) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = scale * uniform();
    return v;
  }

  Matrix matrix(Index rows, Index cols, double scale = 1.0) {
    Matrix a(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) a(i, j) = scale * uniform();
    return a;
  }

  Matrix skew(Index n, double scale = 1.0) {
    const Matrix b = matrix(n, n, scale);
    return b - b.transpose();
  }

  Matrix symmetric(Index n, double scale = 1.0) {
    const Matrix b = matrix(n, n, scale);
    return 0.5 * (b + b.transpose());
  }

  // Random polynomial with monomials of the given degrees.
  ekahan::PolynomialPotential polynomial(Index dim, const std::vector<int>& degrees, int terms_per_degree) {
    std::vector<ekahan::Monomial> terms;
    for (int d : degrees) {
      for (int t = 0; t < terms_per_degree; ++t) {
        std::map<Index, int> powers;
        for (int s = 0; s < d; ++s) ++powers[index(0, dim - 1)];
        ekahan::Monomial m{uniform(), {}};
        for (const auto& [v, p] : powers) m.factors.emplace_back(v, p);
        terms.push_back(std::move(m));
      }
    }
    return ekahan::PolynomialPotential::from_monomials(dim, std::move(terms));
  }

  ekahan::SystemPtr cubic_system(Index dim, bool homogeneous = false) {
    auto u = homogeneous ? polynomial(dim, {3}, 2 * static_cast<int>(dim))
                         : polynomial(dim, {2, 3}, 2 * static_cast<int>(dim));
    return std::make_shared<const ekahan::SemilinearSystem>(skew(dim), symmetric(dim), std::move(u));
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// e^A by Taylor series in long double with scaling and squaring. Independent
// of the Pade implementation under test.
inline Matrix taylor_exponential(const Matrix& a) {
  using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const Index n = a.rows();
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int s = 0;
  while (std::ldexp(norm, -s) > 0.125) ++s;
  const LMatrix x = a.cast<long double>() / std::ldexp(1.0L, s);
  LMatrix term = LMatrix::Identity(n, n);
  LMatrix sum = term;
  for (int k = 1; k < 40; ++k) {
    term = term * x / static_cast<long double>(k);
    sum += term;
  }
  for (int i = 0; i < s; ++i) sum = sum * sum;
  return sum.cast<double>();
}

// phi(A) = sum_k A^k / (k+1)! by Taylor series on the augmented matrix.
inline Matrix taylor_phi(const Matrix& a) {
  const Index n = a.rows();
  Matrix aug = Matrix::Zero(2 * n, 2 * n);
  aug.topLeftCorner(n, n) = a;
  aug.topRightCorner(n, n).setIdentity();
  return taylor_exponential(aug).topRightCorner(n, n);
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace testing
