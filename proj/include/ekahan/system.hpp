#pragma once

#include <memory>
#include <optional>

#include "ekahan/linalg.hpp"
#include "ekahan/polynomial.hpp"

namespace ekahan {

/// x' = Q M x + Q grad U(x), with energy H(x) = 1/2 x^T M x + U(x).
///
/// M must be symmetric. The system is conservative when Q is skew, in which
/// case H is a first integral. Q and M are held dense; sparse copies are
/// kept for matrix-vector products when they are mostly zero.
class SemilinearSystem {
 public:
  SemilinearSystem(Matrix structure, Matrix quadratic, PolynomialPotential potential);

  Index dim() const { return q_.rows(); }
  const Matrix& structure_matrix() const { return q_; }
  const Matrix& quadratic_matrix() const { return m_; }
  /// A = Q M
  const Matrix& linear_operator() const { return a_; }
  const PolynomialPotential& potential() const { return u_; }
  bool conservative() const { return conservative_; }

  Vector apply_structure(const Vector& v) const;
  Vector apply_quadratic(const Vector& v) const;
  Vector apply_linear_operator(const Vector& v) const;

  Vector vector_field(const Vector& x) const;
  /// Nonlinear part f(x) = Q grad U(x).
  Vector nonlinear_field(const Vector& x) const;
  Vector energy_gradient(const Vector& x) const;
  double energy(const Vector& x) const;
  double quadratic_energy(const Vector& x) const;

 private:
  void check_dim(const Vector& x, const char* what) const;

  Matrix q_;
  Matrix m_;
  Matrix a_;
  PolynomialPotential u_;
  bool conservative_ = false;
  std::optional<SparseMatrix> q_sparse_;
  std::optional<SparseMatrix> m_sparse_;
  std::optional<SparseMatrix> a_sparse_;
};

using SystemPtr = std::shared_ptr<const SemilinearSystem>;

inline constexpr double kStructureTolerance = 1e-14;

/// Adds an auxiliary leading coordinate x0 (held at 1) with zero rows and
/// columns in Q and M, and the homogenized potential.
SemilinearSystem homogenize(const SemilinearSystem& system);

/// (1, x)
Vector extend_state(const Vector& x);

}  // namespace ekahan
