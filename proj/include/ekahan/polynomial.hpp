#pragma once

#include <functional>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "ekahan/linalg.hpp"

namespace ekahan {

/// coefficient * prod_k x[var_k]^{power_k}
struct Monomial {
  double coefficient = 0.0;
  std::vector<std::pair<Index, int>> factors;  // (variable, power >= 1)

  int degree() const;
};

/// Fast-path evaluation rules for structured potentials (lattices, PDE grids)
/// where an explicit monomial list would be large. `hessian` and
/// `multilinear` are optional.
struct PotentialCallbacks {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Vector(const Vector&, const Vector&)> hessian_vector;
  std::function<SparseMatrix(const Vector&)> hessian;
  std::function<double(std::span<const Vector>)> multilinear;
};

/// A polynomial potential U: R^dim -> R.
///
/// Either a list of monomials (exact derivatives, tensor-form multilinear
/// form) or a set of callbacks. `support()` lists the coordinates U depends
/// on; gradients and Hessians vanish outside it, which lets integrators
/// restrict their linear algebra to that block.
class PolynomialPotential {
 public:
  static PolynomialPotential zero(Index dim);
  static PolynomialPotential from_monomials(Index dim, std::vector<Monomial> terms);
  static PolynomialPotential from_callbacks(Index dim, int degree, bool homogeneous,
                                            std::vector<Index> support,
                                            PotentialCallbacks callbacks);

  Index dim() const { return dim_; }
  int degree() const { return degree_; }
  bool homogeneous() const { return homogeneous_; }
  bool is_zero() const { return !callbacks_ && terms_.empty(); }
  const std::vector<Index>& support() const { return support_; }
  bool has_monomials() const { return !callbacks_; }
  const std::vector<Monomial>& monomials() const { return terms_; }
  bool has_multilinear_fast_path() const { return callbacks_ && callbacks_->multilinear; }

  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  Vector hessian_vector(const Vector& x, const Vector& v) const;
  SparseMatrix hessian(const Vector& x) const;
  /// U''(x) restricted to support() x support(), rows and columns in support order.
  SparseMatrix support_hessian(const Vector& x) const;
  Matrix support_hessian_dense(const Vector& x) const;

  /// Tensor-route multilinear form; requires a homogeneous potential of
  /// degree args.size() with monomials or a multilinear callback.
  double multilinear_direct(std::span<const Vector> args) const;

 private:
  PolynomialPotential() = default;
  void check_dim(const Vector& x, const char* what) const;
  void index_support();

  Index dim_ = 0;
  int degree_ = 0;
  bool homogeneous_ = true;
  std::vector<Index> support_;
  std::vector<Index> support_position_;  // per coordinate: position in support_, or -1
  std::vector<Monomial> terms_;
  std::shared_ptr<const PotentialCallbacks> callbacks_;
};

/// -1/2 grad U(a) + 2 grad U((a+b)/2) - 1/2 grad U(b); requires degree <= 3.
Vector kahan_gradient(const PolynomialPotential& u, const Vector& a, const Vector& b);

/// Symmetric (k+1)-linear polarization of grad U for homogeneous U of degree
/// k+2, as an alternating sum over nonempty subsets of the points. Subsets are
/// visited in increasing bitmask order and each subset sum is accumulated in
/// argument order.
Vector polarized_gradient(const PolynomialPotential& u, std::span<const Vector> points);

/// Symmetric d-linear form with multilinear_U(x, ..., x) = U(x). Uses the
/// tensor route when available, else the polarization sum.
double multilinear_U(const PolynomialPotential& u, std::span<const Vector> args);

/// (1/d!) sum_{S nonempty} (-1)^{d-|S|} U(sum_{i in S} x_i).
double polarization_sum(const PolynomialPotential& u, std::span<const Vector> args);

/// Number of Gauss-Legendre nodes that integrate the AVF line integral of
/// grad U exactly: ceil(degree/2), at least one.
int avf_quadrature_nodes(int degree);

/// int_0^1 grad U(xi a + (1 - xi) b) dxi, evaluated exactly by quadrature.
Vector avf_gradient(const PolynomialPotential& u, const Vector& a, const Vector& b);

/// Homogeneous extension on (x0, x) with homogenize(U)(1, x) = U(x). The
/// auxiliary coordinate is index 0.
PolynomialPotential homogenize(const PolynomialPotential& u);

}  // namespace ekahan
