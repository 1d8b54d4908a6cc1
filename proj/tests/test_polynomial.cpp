#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "ekahan/polynomial.hpp"
#include "support.hpp"

using namespace ekahan;

namespace {

Vector fd_gradient(const PolynomialPotential& u, const Vector& x) {
  const double eps = 1e-5;
  Vector g(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    Vector p = x, m = x;
    p[i] += eps;
    m[i] -= eps;
    // Fourth-order central difference.
    Vector p2 = x, m2 = x;
    p2[i] += 2 * eps;
    m2[i] -= 2 * eps;
    g[i] = (-u.value(p2) + 8 * u.value(p) - 8 * u.value(m) + u.value(m2)) / (12 * eps);
  }
  return g;
}

}  // namespace

TEST_CASE("monomial potentials: value, gradient and Hessian agree with finite differences") {
  testing::Gen gen(101);
  for (int trial = 0; trial < 25; ++trial) {
    const Index n = gen.index(1, 6);
    const auto u = gen.polynomial(n, {1, 2, 3, 4}, 3);
    const Vector x = gen.vector(n);
    CHECK((u.gradient(x) - fd_gradient(u, x)).lpNorm<Eigen::Infinity>() <= 1e-8);
    const Matrix hess(u.hessian(x));
    const Vector v = gen.vector(n);
    CHECK((hess * v - u.hessian_vector(x, v)).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK(max_abs(hess - hess.transpose()) <= 1e-12);
    const double eps = 1e-6;
    const Vector fd = (u.gradient(x + eps * v) - u.gradient(x - eps * v)) / (2 * eps);
    CHECK((fd - hess * v).lpNorm<Eigen::Infinity>() <= 1e-7);
  }
}

TEST_CASE("support-restricted Hessians match the full Hessian") {
  testing::Gen gen(139);
  for (int trial = 0; trial < 15; ++trial) {
    const Index n = gen.index(2, 7);
    const auto u = gen.polynomial(n, {2, 3, 4}, 2);
    const Vector x = gen.vector(n);
    const Matrix full(u.hessian(x));
    const auto& s = u.support();
    Matrix expected(static_cast<Index>(s.size()), static_cast<Index>(s.size()));
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t j = 0; j < s.size(); ++j) expected(i, j) = full(s[i], s[j]);
    CHECK(max_abs(Matrix(u.support_hessian(x)) - expected) <= 1e-13);
    CHECK(max_abs(u.support_hessian_dense(x) - expected) <= 1e-13);
  }
}

TEST_CASE("support lists exactly the variables the potential depends on") {
  std::vector<Monomial> terms = {{1.0, {{3, 2}}}, {2.0, {{1, 1}, {3, 1}}}};
  const auto u = PolynomialPotential::from_monomials(5, terms);
  CHECK(u.support() == std::vector<Index>{1, 3});
  CHECK(u.degree() == 2);
  CHECK(u.homogeneous());
  const auto z = PolynomialPotential::zero(4);
  CHECK(z.is_zero());
  CHECK(z.support().empty());
  CHECK(z.value(Vector::Ones(4)) == 0.0);
}

TEST_CASE("Kahan gradient: definition and the homogeneous cubic energy identity") {
  testing::Gen gen(103);
  for (int trial = 0; trial < 25; ++trial) {
    const Index n = gen.index(1, 6);
    const auto u = gen.polynomial(n, {3}, 4);
    const Vector a = gen.vector(n), b = gen.vector(n);
    const Vector direct = -0.5 * u.gradient(a) + 2.0 * u.gradient(0.5 * (a + b)) - 0.5 * u.gradient(b);
    const Vector g = kahan_gradient(u, a, b);
    CHECK((g - direct).lpNorm<Eigen::Infinity>() <= 1e-13);
    // (b - a)^T g = U(b) - U(a) - U(b - a) for homogeneous cubic U.
    CHECK((b - a).dot(g) == doctest::Approx(u.value(b) - u.value(a) - u.value(b - a)).epsilon(1e-12));
    // Symmetric in its arguments and consistent on the diagonal.
    CHECK((kahan_gradient(u, b, a) - g).lpNorm<Eigen::Infinity>() <= 1e-13);
    CHECK((kahan_gradient(u, a, a) - u.gradient(a)).lpNorm<Eigen::Infinity>() <= 1e-13);
  }
  CHECK_THROWS_AS(kahan_gradient(gen.polynomial(2, {4}, 1), Vector::Zero(2), Vector::Zero(2)),
                  std::invalid_argument);
}

TEST_CASE("averaged gradient is a discrete gradient") {
  testing::Gen gen(107);
  for (int trial = 0; trial < 25; ++trial) {
    const Index n = gen.index(1, 6);
    const auto u = gen.polynomial(n, {1, 2, 3, 4, 5}, 2);
    const Vector a = gen.vector(n), b = gen.vector(n);
    const Vector g = avf_gradient(u, a, b);
    CHECK((b - a).dot(g) == doctest::Approx(u.value(b) - u.value(a)).epsilon(1e-12));
    // Oracle: composite Simpson with many panels.
    const int panels = 2000;
    Vector simpson = Vector::Zero(n);
    for (int i = 0; i <= panels; ++i) {
      const double xi = static_cast<double>(i) / panels;
      const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      simpson += w * u.gradient(xi * a + (1 - xi) * b);
    }
    simpson /= 3.0 * panels;
    CHECK((g - simpson).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
  CHECK(avf_quadrature_nodes(0) == 1);
  CHECK(avf_quadrature_nodes(3) == 2);
  CHECK(avf_quadrature_nodes(4) == 2);
  CHECK(avf_quadrature_nodes(5) == 3);
}

TEST_CASE("multilinear form: tensor route agrees with the polarization sum") {
  testing::Gen gen(109);
  for (int trial = 0; trial < 30; ++trial) {
    const Index n = gen.index(1, 5);
    const int d = static_cast<int>(gen.index(2, 5));
    const auto u = gen.polynomial(n, {d}, 3);
    std::vector<Vector> args;
    for (int s = 0; s < d; ++s) args.push_back(gen.vector(n));
    const double tensor = multilinear_U(u, args);
    CHECK(tensor == doctest::Approx(polarization_sum(u, args)).epsilon(1e-11));
    CHECK(tensor == doctest::Approx(u.multilinear_direct(args)).epsilon(1e-14));
    // Symmetric under permutation of the arguments.
    std::vector<Vector> shuffled = args;
    std::reverse(shuffled.begin(), shuffled.end());
    std::rotate(shuffled.begin(), shuffled.begin() + 1, shuffled.end());
    CHECK(multilinear_U(u, shuffled) == doctest::Approx(tensor).epsilon(1e-12));
    // On the diagonal it reproduces U.
    const Vector x = gen.vector(n);
    const std::vector<Vector> diag(static_cast<std::size_t>(d), x);
    CHECK(multilinear_U(u, diag) == doctest::Approx(u.value(x)).epsilon(1e-12));
  }
}

TEST_CASE("polarized gradient is the derivative of the multilinear form in its free slot") {
  testing::Gen gen(113);
  for (int trial = 0; trial < 30; ++trial) {
    const Index n = gen.index(1, 5);
    const int d = static_cast<int>(gen.index(2, 5));
    const auto u = gen.polynomial(n, {d}, 3);
    std::vector<Vector> points;
    for (int s = 0; s < d - 1; ++s) points.push_back(gen.vector(n));
    const Vector g = polarized_gradient(u, points);
    const Vector v = gen.vector(n);
    std::vector<Vector> args = points;
    args.push_back(v);
    CHECK(g.dot(v) == doctest::Approx(d * polarization_sum(u, args)).epsilon(1e-11));
    const Vector x = gen.vector(n);
    const std::vector<Vector> diag(static_cast<std::size_t>(d - 1), x);
    CHECK((polarized_gradient(u, diag) - u.gradient(x)).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("polarized gradient with two points is the Kahan gradient for homogeneous cubics") {
  testing::Gen gen(127);
  const auto u = gen.polynomial(4, {3}, 6);
  const Vector a = gen.vector(4), b = gen.vector(4);
  const std::vector<Vector> pts = {a, b};
  CHECK((polarized_gradient(u, pts) - kahan_gradient(u, a, b)).lpNorm<Eigen::Infinity>() <= 1e-13);
}

TEST_CASE("polarization requires matching homogeneous degree") {
  testing::Gen gen(131);
  const auto mixed = gen.polynomial(3, {2, 3}, 2);
  const std::vector<Vector> three(3, Vector::Ones(3));
  CHECK_THROWS_AS(multilinear_U(mixed, three), std::invalid_argument);
  const auto cubic = gen.polynomial(3, {3}, 2);
  const std::vector<Vector> four(4, Vector::Ones(3));
  CHECK_THROWS_AS(polarized_gradient(cubic, four), std::invalid_argument);
}

TEST_CASE("homogenization keeps values and gradients on the slice x0 = 1") {
  testing::Gen gen(137);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = gen.index(1, 5);
    const auto u = gen.polynomial(n, {0, 1, 2, 3}, 2);
    const auto uh = homogenize(u);
    CHECK(uh.homogeneous());
    CHECK(uh.dim() == n + 1);
    const Vector x = gen.vector(n);
    Vector ext(n + 1);
    ext << 1.0, x;
    CHECK(uh.value(ext) == doctest::Approx(u.value(x)).epsilon(1e-13));
    CHECK((uh.gradient(ext).tail(n) - u.gradient(x)).lpNorm<Eigen::Infinity>() <= 1e-13);
    // Homogeneous of its degree: U(t y) = t^d U(y).
    const Vector y = gen.vector(n + 1);
    CHECK(uh.value(2.0 * y) == doctest::Approx(std::pow(2.0, uh.degree()) * uh.value(y)).epsilon(1e-12));
  }
}

TEST_CASE("callback potentials derive a Hessian from Hessian-vector products") {
  const Index n = 3;
  PotentialCallbacks cb;
  cb.value = [](const Vector& x) { return x[0] * x[0] * x[2]; };
  cb.gradient = [](const Vector& x) {
    Vector g = Vector::Zero(3);
    g[0] = 2 * x[0] * x[2];
    g[2] = x[0] * x[0];
    return g;
  };
  cb.hessian_vector = [](const Vector& x, const Vector& v) {
    Vector h = Vector::Zero(3);
    h[0] = 2 * x[2] * v[0] + 2 * x[0] * v[2];
    h[2] = 2 * x[0] * v[0];
    return h;
  };
  const auto u = PolynomialPotential::from_callbacks(n, 3, true, {0, 2}, cb);
  const Vector x = Vector::LinSpaced(3, 0.5, 1.5);
  Matrix expected = Matrix::Zero(3, 3);
  expected(0, 0) = 2 * x[2];
  expected(0, 2) = expected(2, 0) = 2 * x[0];
  CHECK(max_abs(Matrix(u.hessian(x)) - expected) <= 1e-15);
  CHECK_FALSE(u.has_multilinear_fast_path());
  // Without a multilinear callback the form falls back to polarization.
  const std::vector<Vector> args(3, x);
  CHECK(multilinear_U(u, args) == doctest::Approx(u.value(x)).epsilon(1e-13));
}

TEST_CASE("invalid monomials are rejected") {
  CHECK_THROWS_AS(PolynomialPotential::from_monomials(2, {{1.0, {{2, 1}}}}), std::invalid_argument);
  CHECK_THROWS_AS(PolynomialPotential::from_monomials(2, {{1.0, {{0, 1}, {0, 2}}}}), std::invalid_argument);
  CHECK_THROWS_AS(PolynomialPotential::from_monomials(2, {{std::nan(""), {{0, 1}}}}), std::invalid_argument);
  const auto u = PolynomialPotential::from_monomials(2, {{1.0, {{0, 3}}}});
  CHECK_THROWS_AS(u.value(Vector::Zero(3)), std::invalid_argument);
}
