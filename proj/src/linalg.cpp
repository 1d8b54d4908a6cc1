#include "ekahan/linalg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#if defined(__SSE2__)
#include <pmmintrin.h>
#include <xmmintrin.h>
#endif

namespace ekahan {

namespace {

// Exponential blocks of discretized wave operators hold entries far below
// 1e-300; eliminating with them produces subnormals, which are an order of
// magnitude slower on x86. Results below DBL_MIN are flushed to zero while a
// guard is alive, then the caller's mode is restored.
class FlushSubnormals {
 public:
#if defined(__SSE2__)
  FlushSubnormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | _MM_FLUSH_ZERO_ON | _MM_DENORMALS_ZERO_ON); }
  ~FlushSubnormals() { _mm_setcsr(saved_); }

 private:
  unsigned saved_;
#endif
};

}  // namespace

void require_square(const Matrix& a, const char* what) {
  if (a.rows() != a.cols()) {
    std::ostringstream os;
    os << what << ": expected a square matrix, got " << a.rows() << "x" << a.cols();
    throw std::invalid_argument(os.str());
  }
}

void require_finite(const Matrix& a, const char* what) {
  if (!a.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

double max_abs(const Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

SparseMatrix to_sparse(const Matrix& a) {
  std::vector<Eigen::Triplet<double>> triplets;
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i)
      if (a(i, j) != 0.0) triplets.emplace_back(i, j, a(i, j));
  SparseMatrix s(a.rows(), a.cols());
  s.setFromTriplets(triplets.begin(), triplets.end());
  return s;
}

namespace {

// Coefficients and 1-norm bounds from Higham, SIAM J. Matrix Anal. Appl. 26 (2005).
constexpr std::array<double, 4> kPade3 = {120.0, 60.0, 12.0, 1.0};
constexpr std::array<double, 6> kPade5 = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
constexpr std::array<double, 8> kPade7 = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                                          25200.0,    1512.0,    56.0,      1.0};
constexpr std::array<double, 10> kPade9 = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0,
                                           30270240.0,    2162160.0,    110880.0,     3960.0,
                                           90.0,          1.0};
constexpr std::array<double, 14> kPade13 = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
    1323241920.0,        40840800.0,          960960.0,           16380.0,
    182.0,               1.0};

constexpr double kTheta3 = 1.495585217958292e-2;
constexpr double kTheta5 = 2.539398330063230e-1;
constexpr double kTheta7 = 9.504178996162932e-1;
constexpr double kTheta9 = 2.097847961257068e0;
constexpr double kTheta13 = 5.371920351148152e0;

// Builds U (odd part) and V (even part) so that r(A) = (V - U)^{-1} (V + U).
template <std::size_t N>
void pade_low(const Matrix& a, const std::array<double, N>& b, Matrix& u, Matrix& v) {
  const Index n = a.rows();
  const Matrix a2 = a * a;
  Matrix power = Matrix::Identity(n, n);
  Matrix odd = b[1] * power;
  v = b[0] * power;
  for (std::size_t k = 2; k < N; k += 2) {
    power = power * a2;
    v += b[k] * power;
    if (k + 1 < N) odd += b[k + 1] * power;
  }
  u.noalias() = a * odd;
}

void pade13(const Matrix& a, Matrix& u, Matrix& v) {
  const auto& b = kPade13;
  const Index n = a.rows();
  const Matrix ident = Matrix::Identity(n, n);
  const Matrix a2 = a * a;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;
  Matrix inner = b[13] * a6 + b[11] * a4 + b[9] * a2;
  Matrix tmp = a6 * inner;
  tmp += b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident;
  u.noalias() = a * tmp;
  inner = b[12] * a6 + b[10] * a4 + b[8] * a2;
  v = a6 * inner;
  v += b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident;
}

}  // namespace

Matrix matrix_exponential(const Matrix& a_in, double t) {
  require_square(a_in, "matrix_exponential");
  const Index n = a_in.rows();
  if (n == 0) return Matrix(0, 0);
  Matrix a = t * a_in;
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  if (!std::isfinite(norm1) || !a.allFinite()) throw std::invalid_argument("matrix_exponential: non-finite entry");

  Matrix u, v;
  int squarings = 0;
  if (norm1 <= kTheta3) {
    pade_low(a, kPade3, u, v);
  } else if (norm1 <= kTheta5) {
    pade_low(a, kPade5, u, v);
  } else if (norm1 <= kTheta7) {
    pade_low(a, kPade7, u, v);
  } else if (norm1 <= kTheta9) {
    pade_low(a, kPade9, u, v);
  } else {
    squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / kTheta13))));
    a /= std::ldexp(1.0, squarings);
    pade13(a, u, v);
  }

  const Matrix numer = v + u;
  const Matrix denom = v - u;
  Matrix result = denom.partialPivLu().solve(numer);
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

ExponentialOperators exponential_operators(const Matrix& a, double h) {
  require_square(a, "exponential_operators");
  const Index n = a.rows();
  Matrix aug = Matrix::Zero(2 * n, 2 * n);
  aug.topLeftCorner(n, n) = h * a;
  aug.topRightCorner(n, n).setIdentity();
  const Matrix e = matrix_exponential(aug);
  return ExponentialOperators{h, e.topLeftCorner(n, n), e.topRightCorner(n, n)};
}

Matrix phi1(const Matrix& v) {
  require_square(v, "phi1");
  return exponential_operators(v, 1.0).phi_ha;
}

void LuSolver::factorize(const Matrix& a) {
  require_square(a, "LuSolver");
  {
    const FlushSubnormals guard;
    lu_.compute(a);
  }
  const double scale = max_abs(a);
  const double min_pivot = a.rows() == 0 ? 1.0 : lu_.matrixLU().diagonal().cwiseAbs().minCoeff();
  if (!(min_pivot >= kSingularPivotRatio * scale) || scale == 0.0) {
    std::ostringstream os;
    os << "singular matrix: min pivot " << min_pivot << " vs max|A| " << scale;
    throw SingularMatrixError(os.str());
  }
}

Vector LuSolver::solve(const Vector& b) const {
  if (b.size() != lu_.rows()) throw std::invalid_argument("LuSolver::solve: dimension mismatch");
  return lu_.solve(b);
}

Matrix LuSolver::solve(const Matrix& b) const {
  if (b.rows() != lu_.rows()) throw std::invalid_argument("LuSolver::solve: dimension mismatch");
  return lu_.solve(b);
}

Vector solve_linear(const Matrix& a, const Vector& b) {
  require_square(a, "solve_linear");
  if (a.rows() != b.size()) throw std::invalid_argument("solve_linear: dimension mismatch");
  return LuSolver(a).solve(b);
}

}  // namespace ekahan
