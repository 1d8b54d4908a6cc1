#include "ekahan/system.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace ekahan {

namespace {

constexpr double kSparseDensity = 0.3;

std::optional<SparseMatrix> sparse_if_worthwhile(const Matrix& a) {
  if (a.size() == 0) return std::nullopt;
  const auto nnz = (a.array() != 0.0).count();
  if (static_cast<double>(nnz) > kSparseDensity * static_cast<double>(a.size())) return std::nullopt;
  return to_sparse(a);
}

Vector apply(const Matrix& dense, const std::optional<SparseMatrix>& sparse, const Vector& v) {
  if (sparse) return *sparse * v;
  return dense * v;
}

}  // namespace

SemilinearSystem::SemilinearSystem(Matrix structure, Matrix quadratic, PolynomialPotential potential)
    : q_(std::move(structure)), m_(std::move(quadratic)), u_(std::move(potential)) {
  require_square(q_, "SemilinearSystem: Q");
  require_square(m_, "SemilinearSystem: M");
  require_finite(q_, "SemilinearSystem: Q");
  require_finite(m_, "SemilinearSystem: M");
  if (q_.rows() != m_.rows() || q_.rows() != u_.dim()) {
    std::ostringstream os;
    os << "SemilinearSystem: dimension mismatch (Q " << q_.rows() << ", M " << m_.rows() << ", U "
       << u_.dim() << ")";
    throw std::invalid_argument(os.str());
  }
  const double m_scale = std::max(1.0, max_abs(m_));
  if (max_abs(m_ - m_.transpose()) > kStructureTolerance * m_scale)
    throw std::invalid_argument("SemilinearSystem: M is not symmetric");
  const double q_scale = std::max(1.0, max_abs(q_));
  conservative_ = max_abs(q_ + q_.transpose()) <= kStructureTolerance * q_scale;

  a_ = q_ * m_;
  q_sparse_ = sparse_if_worthwhile(q_);
  m_sparse_ = sparse_if_worthwhile(m_);
  a_sparse_ = sparse_if_worthwhile(a_);
}

void SemilinearSystem::check_dim(const Vector& x, const char* what) const {
  if (x.size() != dim()) {
    std::ostringstream os;
    os << what << ": expected dimension " << dim() << ", got " << x.size();
    throw std::invalid_argument(os.str());
  }
}

Vector SemilinearSystem::apply_structure(const Vector& v) const {
  check_dim(v, "apply_structure");
  return apply(q_, q_sparse_, v);
}

Vector SemilinearSystem::apply_quadratic(const Vector& v) const {
  check_dim(v, "apply_quadratic");
  return apply(m_, m_sparse_, v);
}

Vector SemilinearSystem::apply_linear_operator(const Vector& v) const {
  check_dim(v, "apply_linear_operator");
  return apply(a_, a_sparse_, v);
}

Vector SemilinearSystem::vector_field(const Vector& x) const {
  check_dim(x, "vector_field");
  return apply_structure(energy_gradient(x));
}

Vector SemilinearSystem::nonlinear_field(const Vector& x) const {
  check_dim(x, "nonlinear_field");
  return apply_structure(u_.gradient(x));
}

Vector SemilinearSystem::energy_gradient(const Vector& x) const {
  check_dim(x, "energy_gradient");
  return apply_quadratic(x) + u_.gradient(x);
}

double SemilinearSystem::quadratic_energy(const Vector& x) const {
  check_dim(x, "quadratic_energy");
  return 0.5 * x.dot(apply_quadratic(x));
}

double SemilinearSystem::energy(const Vector& x) const {
  check_dim(x, "energy");
  return quadratic_energy(x) + u_.value(x);
}

SemilinearSystem homogenize(const SemilinearSystem& system) {
  const Index n = system.dim();
  Matrix q = Matrix::Zero(n + 1, n + 1);
  Matrix m = Matrix::Zero(n + 1, n + 1);
  q.bottomRightCorner(n, n) = system.structure_matrix();
  m.bottomRightCorner(n, n) = system.quadratic_matrix();
  return SemilinearSystem(std::move(q), std::move(m), homogenize(system.potential()));
}

Vector extend_state(const Vector& x) {
  Vector out(x.size() + 1);
  out[0] = 1.0;
  out.tail(x.size()) = x;
  return out;
}

}  // namespace ekahan
