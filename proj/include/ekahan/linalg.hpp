#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <stdexcept>
#include <string>

namespace ekahan {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Thrown when a linear system is singular to working precision.
class SingularMatrixError : public std::runtime_error {
 public:
  explicit SingularMatrixError(const std::string& what) : std::runtime_error(what) {}
};

void require_square(const Matrix& a, const char* what);
void require_finite(const Matrix& a, const char* what);
void require_finite(const Vector& v, const char* what);

/// e^{tA} by scaling and squaring with a diagonal Pade approximant
/// (degree 3, 5, 7, 9 or 13 picked from the 1-norm of tA).
Matrix matrix_exponential(const Matrix& a, double t = 1.0);

/// phi(V) = V^{-1}(e^V - I), read from the top-right block of
/// exp([[V, I], [0, 0]]). Well defined for singular V.
Matrix phi1(const Matrix& v);

/// e^{hA} and phi(hA) from a single augmented exponential.
struct ExponentialOperators {
  double h = 0.0;
  Matrix exp_ha;
  Matrix phi_ha;
};

ExponentialOperators exponential_operators(const Matrix& a, double h);

/// Pivot threshold relative to max|A| below which a factorization is
/// rejected as singular.
inline constexpr double kSingularPivotRatio = 1e-13;

/// LU with partial pivoting that refuses near-singular matrices.
class LuSolver {
 public:
  LuSolver() = default;
  explicit LuSolver(const Matrix& a) { factorize(a); }

  /// Throws SingularMatrixError when min |U_ii| < 1e-13 * max|A|.
  void factorize(const Matrix& a);
  Vector solve(const Vector& b) const;
  Matrix solve(const Matrix& b) const;

  Index size() const { return lu_.rows(); }

 private:
  Eigen::PartialPivLU<Matrix> lu_;
};

Vector solve_linear(const Matrix& a, const Vector& b);

double max_abs(const Matrix& a);

/// Dense -> compressed sparse, keeping exact nonzeros only.
SparseMatrix to_sparse(const Matrix& a);

}  // namespace ekahan
