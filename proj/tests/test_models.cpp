#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ekahan/linalg.hpp"
#include "ekahan/models.hpp"
#include "support.hpp"

using namespace ekahan;

namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// c * sum_j ((u_{j+1} - u_j) / dx)^d with u_0 = u_N = 0, expanded into monomials.
PolynomialPotential fpu_monomials(const FpuParams& p) {
  const Index intervals = p.intervals();
  const Index n = intervals - 1;
  const int d = p.p + 2;
  const double c = p.resolved_epsilon() / ((p.p + 1) * (p.p + 2)) / std::pow(p.dx, d);
  std::vector<Monomial> terms;
  for (Index j = 0; j < intervals; ++j) {
    const Index right = j;      // u_{j+1} in interior numbering
    const Index left = j - 1;   // u_j
    const bool has_right = j < n;
    const bool has_left = j > 0;
    for (int a = 0; a <= d; ++a) {
      const int b = d - a;  // a powers of the right node, b of the left
      if ((a > 0 && !has_right) || (b > 0 && !has_left)) continue;
      Monomial m{c * binomial(d, a) * ((b % 2) ? -1.0 : 1.0), {}};
      if (a > 0) m.factors.emplace_back(right, a);
      if (b > 0) m.factors.emplace_back(left, b);
      terms.push_back(std::move(m));
    }
  }
  return PolynomialPotential::from_monomials(2 * n, std::move(terms));
}

}  // namespace

TEST_CASE("model names round-trip") {
  for (ModelId id : {ModelId::henon_heiles, ModelId::fpu, ModelId::zk}) CHECK(parse_model(model_name(id)) == id);
  CHECK_FALSE(parse_model("lorenz").has_value());
}

TEST_CASE("Henon-Heiles model") {
  const Model hh = henon_heiles();
  const auto& sys = *hh.system;
  CHECK(sys.dim() == 4);
  CHECK(sys.conservative());
  const double a = 0.082;
  CHECK(sys.energy(hh.x0) == doctest::Approx(0.5 * a * a + a * a * a / 3.0).epsilon(1e-15));
  // Oracle vector field: q' = p, p' = -q - (2 q1 q2, q1^2 - q2^2).
  testing::Gen gen(401);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector x = gen.vector(4);
    Vector f(4);
    f << x[2], x[3], -x[0] - 2 * x[0] * x[1], -x[1] - x[0] * x[0] + x[1] * x[1];
    CHECK((sys.vector_field(x) - f).lpNorm<Eigen::Infinity>() <= 1e-15);
  }
  // e^{tQ} rotates each (q_i, p_i) pair.
  const double t = 0.7;
  const Matrix e = matrix_exponential(sys.linear_operator(), t);
  CHECK(e(0, 0) == doctest::Approx(std::cos(t)).epsilon(1e-14));
  CHECK(e(0, 2) == doctest::Approx(std::sin(t)).epsilon(1e-14));
  CHECK(e(2, 0) == doctest::Approx(-std::sin(t)).epsilon(1e-14));
}

TEST_CASE("FPU: structure, potential and callbacks") {
  for (int p : {1, 2}) {
    FpuParams params;
    params.p = p;
    params.length = 16;
    params.dx = 0.5;
    params.m = 0.3;
    const Model model = fpu(params);
    const auto& sys = *model.system;
    const Index n = params.intervals() - 1;
    CHECK(model.name == (p == 1 ? "fpu_p1" : "fpu_p2"));
    CHECK(sys.dim() == 2 * n);
    CHECK(sys.conservative());
    CHECK(sys.potential().degree() == p + 2);
    CHECK(sys.potential().homogeneous());
    CHECK(sys.potential().support().size() == static_cast<std::size_t>(n));
    const Vector zero = Vector::Zero(2 * n);
    CHECK(sys.potential().value(zero) == 0.0);
    CHECK(sys.potential().gradient(zero).lpNorm<Eigen::Infinity>() == 0.0);

    const auto oracle = fpu_monomials(params);
    testing::Gen gen(409 + p);
    for (int trial = 0; trial < 5; ++trial) {
      const Vector x = gen.vector(2 * n, 0.3);
      const Vector v = gen.vector(2 * n, 0.3);
      const auto& u = sys.potential();
      CHECK(u.value(x) == doctest::Approx(oracle.value(x)).epsilon(1e-12));
      CHECK((u.gradient(x) - oracle.gradient(x)).lpNorm<Eigen::Infinity>() <= 1e-11);
      CHECK((u.hessian_vector(x, v) - oracle.hessian_vector(x, v)).lpNorm<Eigen::Infinity>() <= 1e-10);
      CHECK(max_abs(Matrix(u.hessian(x)) - Matrix(oracle.hessian(x))) <= 1e-10);
      std::vector<Vector> args;
      for (int s = 0; s < p + 2; ++s) args.push_back(gen.vector(2 * n, 0.3));
      CHECK(multilinear_U(u, args) == doctest::Approx(multilinear_U(oracle, args)).epsilon(1e-11));
    }
  }
}

TEST_CASE("FPU: damping makes the system dissipative") {
  FpuParams params;
  params.length = 8;
  params.gamma = 0.1;
  CHECK_FALSE(fpu(params).system->conservative());
  params.gamma = 0.0;
  params.beta = 0.05;
  CHECK_FALSE(fpu(params).system->conservative());
}

TEST_CASE("FPU: kink velocity is the time derivative of the displacement") {
  const FpuParams params;
  const auto centres = params.kink_centres();
  CHECK(centres == std::vector<double>{32.0, 96.0});
  CHECK(params.resolved_epsilon() == 0.75);
  FpuParams quartic;
  quartic.p = 2;
  CHECK(quartic.resolved_epsilon() == 100.0);
  const double eps = 1e-4;
  for (double j : {1.0, 20.0, 32.0, 33.5, 64.0, 95.0, 127.0}) {
    const double fd = (fpu_kink_displacement(j, eps, params.alpha, centres) -
                       fpu_kink_displacement(j, -eps, params.alpha, centres)) /
                      (2 * eps);
    CHECK(fpu_kink_velocity(j, params.alpha, centres) == doctest::Approx(fd).epsilon(1e-7));
  }
  // Far from both kinks the profile sits on its plateaus: 0, 1, 2.
  CHECK(fpu_kink_displacement(-200.0, 0.0, 0.1, centres) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(fpu_kink_displacement(64.0, 0.0, 0.1, centres) == doctest::Approx(1.0).epsilon(1e-2));
  CHECK(fpu_kink_displacement(400.0, 0.0, 0.1, centres) == doctest::Approx(2.0).epsilon(1e-6));
  const Model model = fpu(params);
  CHECK(model.x0[31] == doctest::Approx(fpu_kink_displacement(32.0, 0.0, 0.1, centres)).epsilon(1e-15));
}

TEST_CASE("Dirichlet Laplacian is second-order consistent") {
  const double length = 2.0;
  double previous = 0.0;
  for (int level = 0; level < 4; ++level) {
    const Index intervals = 16 << level;
    const double dx = length / intervals;
    const Index n = intervals - 1;
    Vector u(n), exact(n);
    const double k = 3.0 * std::numbers::pi / length;
    for (Index i = 0; i < n; ++i) {
      const double x = (i + 1) * dx;
      u[i] = std::sin(k * x);
      exact[i] = -k * k * std::sin(k * x);
    }
    const double err = (dirichlet_second_difference(n, dx) * u - exact).lpNorm<Eigen::Infinity>();
    if (level > 0) CHECK(previous / err == doctest::Approx(4.0).epsilon(0.03));
    previous = err;
  }
}

TEST_CASE("FPU parameter validation") {
  auto bad = [](auto mutate) {
    FpuParams p;
    mutate(p);
    return p;
  };
  CHECK_THROWS_AS(validate(bad([](FpuParams& p) { p.p = 3; })), std::invalid_argument);
  CHECK_THROWS_AS(validate(bad([](FpuParams& p) { p.dx = 0.0; })), std::invalid_argument);
  CHECK_THROWS_AS(validate(bad([](FpuParams& p) { p.dx = 0.3; })), std::invalid_argument);
  CHECK_THROWS_AS(validate(bad([](FpuParams& p) { p.length = -1; })), std::invalid_argument);
  CHECK_THROWS_AS(validate(bad([](FpuParams& p) { p.gamma = -0.1; })), std::invalid_argument);
  CHECK_THROWS_AS(validate(bad([](FpuParams& p) { p.epsilon = 0.0; })), std::invalid_argument);
  CHECK_THROWS_AS(validate(bad([](FpuParams& p) { p.length = 2; })), std::invalid_argument);
  CHECK_NOTHROW(validate(FpuParams{}));
}

TEST_CASE("ZK: operators, energy and vector field") {
  ZkParams params;
  params.points = 9;
  params.length = 4.0;
  const Model model = zk(params);
  const auto& sys = *model.system;
  const Index n = params.cells();
  const double h = params.dx();
  CHECK(sys.dim() == n * n);
  CHECK(max_abs(sys.structure_matrix() + sys.structure_matrix().transpose()) == 0.0);
  CHECK(max_abs(sys.quadratic_matrix() - sys.quadratic_matrix().transpose()) == 0.0);
  CHECK(sys.structure_matrix().rowwise().sum().lpNorm<Eigen::Infinity>() <= 1e-12);
  CHECK(sys.quadratic_matrix().rowwise().sum().lpNorm<Eigen::Infinity>() <= 1e-12);
  CHECK(sys.conservative());

  auto at = [n](const Vector& u, Index i, Index j) { return u[((i + n) % n) * n + (j + n) % n]; };
  testing::Gen gen(421);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector u = gen.vector(n * n);
    // Energy oracle: h^2 sum [ -((d+x)^2 + (d-x)^2 + (d+y)^2 + (d-y)^2) / 4 + u^3 / 6 ].
    double energy = 0.0;
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        const double c = at(u, i, j);
        const double dxp = (at(u, i + 1, j) - c) / h, dxm = (c - at(u, i - 1, j)) / h;
        const double dyp = (at(u, i, j + 1) - c) / h, dym = (c - at(u, i, j - 1)) / h;
        energy += h * h * (-(dxp * dxp + dxm * dxm + dyp * dyp + dym * dym) / 4.0 + c * c * c / 6.0);
      }
    }
    CHECK(sys.energy(u) == doctest::Approx(energy).epsilon(1e-12));
    // Vector field oracle: -D1x (Lap u + u^2 / 2).
    Vector w(n * n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) {
        const double c = at(u, i, j);
        w[i * n + j] = (at(u, i + 1, j) + at(u, i - 1, j) + at(u, i, j + 1) + at(u, i, j - 1) - 4 * c) / (h * h) +
                       0.5 * c * c;
      }
    Vector f(n * n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) f[i * n + j] = -(at(w, i + 1, j) - at(w, i - 1, j)) / (2 * h);
    CHECK((sys.vector_field(u) - f).lpNorm<Eigen::Infinity>() <= 1e-10 * std::max(1.0, f.lpNorm<Eigen::Infinity>()));
  }
  // Initial data sampled on the grid, flattened with y fastest.
  CHECK(model.x0[1 * n + 2] == doctest::Approx(zk_initial_profile(h, 2 * h, params.length)).epsilon(1e-15));
  CHECK(zk_initial_profile(0.3, 0.7, 4.0) == doctest::Approx(zk_initial_profile(4.3, 4.7, 4.0)).epsilon(1e-12));
}

TEST_CASE("periodic difference operators") {
  const Index n = 12;
  const double h = 0.25;
  const Matrix d1 = periodic_first_difference(n, h);
  const Matrix d2 = periodic_second_difference(n, h);
  CHECK(max_abs(d1 + d1.transpose()) == 0.0);
  CHECK(max_abs(d2 - d2.transpose()) == 0.0);
  // Constants are in both kernels.
  CHECK((d1 * Vector::Ones(n)).lpNorm<Eigen::Infinity>() <= 1e-14);
  CHECK((d2 * Vector::Ones(n)).lpNorm<Eigen::Infinity>() <= 1e-13);
}

TEST_CASE("ZK parameter validation") {
  ZkParams p;
  p.points = 4;
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
  p = {};
  p.p = 2;
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
  p = {};
  p.length = 0.0;
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
  CHECK_NOTHROW(validate(ZkParams{}));
}
