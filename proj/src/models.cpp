#include "ekahan/models.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace ekahan {

namespace {

double int_pow(double base, int exponent) {
  double result = 1.0;
  for (int i = 0; i < exponent; ++i) result *= base;
  return result;
}

// log(1 + e^z) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<Index> iota(Index n) {
  std::vector<Index> out(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = i;
  return out;
}

// Forward differences w_j = (u_{j+1} - u_j) / dx, j = 0..N-1, of the
// displacement block padded with u_0 = u_N = 0.
Vector forward_differences(const Vector& x, Index interior, double dx) {
  const Index intervals = interior + 1;
  Vector w(intervals);
  for (Index j = 0; j < intervals; ++j) {
    const double right = j < interior ? x[j] : 0.0;
    const double left = j > 0 ? x[j - 1] : 0.0;
    w[j] = (right - left) / dx;
  }
  return w;
}

}  // namespace

std::string_view model_name(ModelId id) {
  switch (id) {
    case ModelId::henon_heiles: return "henon_heiles";
    case ModelId::fpu: return "fpu";
    case ModelId::zk: return "zk";
  }
  return "unknown";
}

std::optional<ModelId> parse_model(std::string_view name) {
  for (ModelId id : {ModelId::henon_heiles, ModelId::fpu, ModelId::zk})
    if (model_name(id) == name) return id;
  return std::nullopt;
}

double FpuParams::resolved_epsilon() const {
  if (epsilon) return *epsilon;
  return p == 2 ? 100.0 : 0.75;
}

Index FpuParams::intervals() const { return static_cast<Index>(std::llround(length / dx)); }

std::vector<double> FpuParams::kink_centres() const { return {32.0, 96.0}; }

void validate(const FpuParams& params) {
  std::ostringstream os;
  if (params.p != 1 && params.p != 2) {
    os << "fpu: p must be 1 or 2, got " << params.p;
  } else if (!(params.dx > 0.0) || !std::isfinite(params.dx)) {
    os << "fpu: dx must be positive, got " << params.dx;
  } else if (!(params.length > 0.0) || !std::isfinite(params.length)) {
    os << "fpu: L must be positive, got " << params.length;
  } else if (std::abs(params.length / params.dx - static_cast<double>(params.intervals())) >
             1e-9 * (params.length / params.dx)) {
    os << "fpu: L = " << params.length << " is not a multiple of dx = " << params.dx;
  } else if (params.intervals() < 3) {
    os << "fpu: the grid needs at least 3 intervals, got " << params.intervals();
  } else if (!(params.resolved_epsilon() > 0.0)) {
    os << "fpu: epsilon must be positive, got " << params.resolved_epsilon();
  } else if (!(params.beta >= 0.0)) {
    os << "fpu: beta must be >= 0, got " << params.beta;
  } else if (!(params.gamma >= 0.0)) {
    os << "fpu: gamma must be >= 0, got " << params.gamma;
  } else if (!std::isfinite(params.m) || !std::isfinite(params.beta) || !std::isfinite(params.gamma)) {
    os << "fpu: non-finite parameter";
  } else if (!(params.alpha > 0.0)) {
    os << "fpu: alpha must be positive, got " << params.alpha;
  } else {
    return;
  }
  throw std::invalid_argument(os.str());
}

void validate(const ZkParams& params) {
  std::ostringstream os;
  if (params.p != 1) {
    os << "zk: only p = 1 is supported, got " << params.p;
  } else if (params.points < 5) {
    os << "zk: N must be at least 5, got " << params.points;
  } else if (!(params.length > 0.0) || !std::isfinite(params.length)) {
    os << "zk: L must be positive, got " << params.length;
  } else {
    return;
  }
  throw std::invalid_argument(os.str());
}

Matrix dirichlet_second_difference(Index n, double dx) {
  Matrix d = Matrix::Zero(n, n);
  const double s = 1.0 / (dx * dx);
  for (Index i = 0; i < n; ++i) {
    d(i, i) = -2.0 * s;
    if (i > 0) d(i, i - 1) = s;
    if (i + 1 < n) d(i, i + 1) = s;
  }
  return d;
}

Matrix periodic_first_difference(Index n, double dx) {
  Matrix d = Matrix::Zero(n, n);
  const double s = 1.0 / (2.0 * dx);
  for (Index i = 0; i < n; ++i) {
    d(i, (i + 1) % n) += s;
    d(i, (i + n - 1) % n) -= s;
  }
  return d;
}

Matrix periodic_second_difference(Index n, double dx) {
  Matrix d = Matrix::Zero(n, n);
  const double s = 1.0 / (dx * dx);
  for (Index i = 0; i < n; ++i) {
    d(i, i) -= 2.0 * s;
    d(i, (i + 1) % n) += s;
    d(i, (i + n - 1) % n) += s;
  }
  return d;
}

double fpu_kink_displacement(double j, double t, double alpha, const std::vector<double>& centres) {
  const double drift = t * std::sinh(alpha);
  double q = 0.0;
  for (double k : centres)
    q += softplus(2.0 * (alpha * (j - k) + drift)) - softplus(2.0 * (alpha * (j - k - 1.0) + drift));
  return 5.0 * q;
}

double fpu_kink_velocity(double j, double alpha, const std::vector<double>& centres) {
  double v = 0.0;
  for (double k : centres)
    v += 2.0 * std::sinh(alpha) * (logistic(2.0 * alpha * (j - k)) - logistic(2.0 * alpha * (j - k - 1.0)));
  return 5.0 * v;
}

double zk_initial_profile(double x, double y, double length) {
  using std::numbers::pi;
  const double fx = std::sin(2.0 * pi * x / length) +
                    (1.0 / std::numbers::sqrt2) * std::cos(4.0 * pi * x / length + pi / 4.0);
  const double fy = std::cos(2.0 * pi * y / length) +
                    (1.0 / std::numbers::sqrt2) * std::cos(4.0 * pi * y / length + pi / 3.0);
  return std::numbers::sqrt2 * fx * fy;
}

Model henon_heiles() {
  Matrix q = Matrix::Zero(4, 4);
  q.topRightCorner(2, 2).setIdentity();
  q.bottomLeftCorner(2, 2) = -Matrix::Identity(2, 2);
  std::vector<Monomial> terms = {{1.0, {{0, 2}, {1, 1}}}, {-1.0 / 3.0, {{1, 3}}}};
  auto u = PolynomialPotential::from_monomials(4, std::move(terms));
  Vector x0(4);
  x0 << 0.0, -0.082, 0.0, 0.0;
  return {"henon_heiles", std::make_shared<const SemilinearSystem>(q, Matrix::Identity(4, 4), std::move(u)),
          x0};
}

Model fpu(const FpuParams& params) {
  validate(params);
  const Index intervals = params.intervals();
  const Index n = intervals - 1;
  const double dx = params.dx;
  const int d = params.p + 2;
  const double c = params.resolved_epsilon() / static_cast<double>((params.p + 1) * (params.p + 2));

  const Matrix lap = dirichlet_second_difference(n, dx);
  Matrix q = Matrix::Zero(2 * n, 2 * n);
  q.topRightCorner(n, n).setIdentity();
  q.bottomLeftCorner(n, n) = -Matrix::Identity(n, n);
  q.bottomRightCorner(n, n) = params.beta * lap - params.gamma * Matrix::Identity(n, n);
  Matrix m = Matrix::Zero(2 * n, 2 * n);
  m.topLeftCorner(n, n) = params.m * params.m * Matrix::Identity(n, n) - lap;
  m.bottomRightCorner(n, n).setIdentity();

  PotentialCallbacks cb;
  cb.value = [=](const Vector& x) {
    const Vector w = forward_differences(x, n, dx);
    double sum = 0.0;
    for (Index j = 0; j < intervals; ++j) sum += int_pow(w[j], d);
    return c * sum;
  };
  // dU/du_i = c d (w_{i-1}^{d-1} - w_i^{d-1}) / dx in interior-node numbering.
  cb.gradient = [=](const Vector& x) {
    const Vector w = forward_differences(x, n, dx);
    Vector g = Vector::Zero(2 * n);
    for (Index i = 0; i < n; ++i)
      g[i] = c * d * (int_pow(w[i], d - 1) - int_pow(w[i + 1], d - 1)) / dx;
    return g;
  };
  cb.hessian_vector = [=](const Vector& x, const Vector& v) {
    const Vector w = forward_differences(x, n, dx);
    const Vector z = forward_differences(v, n, dx);
    Vector out = Vector::Zero(2 * n);
    for (Index i = 0; i < n; ++i)
      out[i] = c * d * (d - 1) * (int_pow(w[i], d - 2) * z[i] - int_pow(w[i + 1], d - 2) * z[i + 1]) / dx;
    return out;
  };
  cb.hessian = [=](const Vector& x) {
    const Vector w = forward_differences(x, n, dx);
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(4 * intervals));
    for (Index j = 0; j < intervals; ++j) {
      const double kappa = c * d * (d - 1) * int_pow(w[j], d - 2) / (dx * dx);
      // w_j depends on u_{j+1} (index j) with +1 and on u_j (index j-1) with -1.
      const bool has_right = j < n;
      const bool has_left = j > 0;
      if (has_right) triplets.emplace_back(j, j, kappa);
      if (has_left) triplets.emplace_back(j - 1, j - 1, kappa);
      if (has_right && has_left) {
        triplets.emplace_back(j, j - 1, -kappa);
        triplets.emplace_back(j - 1, j, -kappa);
      }
    }
    SparseMatrix h(2 * n, 2 * n);
    h.setFromTriplets(triplets.begin(), triplets.end());
    return h;
  };
  cb.multilinear = [=](std::span<const Vector> args) {
    Vector prod = Vector::Ones(intervals);
    for (const auto& y : args) prod.array() *= forward_differences(y, n, dx).array();
    return c * prod.sum();
  };
  auto u = PolynomialPotential::from_callbacks(2 * n, d, true, iota(n), std::move(cb));

  const auto centres = params.kink_centres();
  Vector x0(2 * n);
  for (Index i = 0; i < n; ++i) {
    const auto j = static_cast<double>(i + 1);
    x0[i] = fpu_kink_displacement(j, 0.0, params.alpha, centres);
    x0[n + i] = fpu_kink_velocity(j, params.alpha, centres);
  }
  std::ostringstream name;
  name << "fpu_p" << params.p;
  return {name.str(), std::make_shared<const SemilinearSystem>(std::move(q), std::move(m), std::move(u)),
          std::move(x0)};
}

Model zk(const ZkParams& params) {
  validate(params);
  const Index n = params.cells();
  const Index dim = n * n;
  const double h = params.dx();
  const double area = h * h;

  // Flattened index i * n + j: x index i, y index j (y fastest).
  const Matrix d1 = periodic_first_difference(n, h);
  const Matrix d2 = periodic_second_difference(n, h);
  Matrix q = Matrix::Zero(dim, dim);
  Matrix m = Matrix::Zero(dim, dim);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const Index row = i * n + j;
      for (Index k = 0; k < n; ++k) {
        if (d1(i, k) != 0.0) q(row, k * n + j) = -d1(i, k) / area;
        if (d2(i, k) != 0.0) m(row, k * n + j) += area * d2(i, k);
        if (d2(j, k) != 0.0) m(row, i * n + k) += area * d2(j, k);
      }
    }
  }

  PotentialCallbacks cb;
  cb.value = [area](const Vector& x) { return area * x.array().cube().sum() / 6.0; };
  cb.gradient = [area](const Vector& x) -> Vector { return 0.5 * area * x.array().square().matrix(); };
  cb.hessian_vector = [area](const Vector& x, const Vector& v) -> Vector {
    return area * (x.array() * v.array()).matrix();
  };
  cb.hessian = [area, dim](const Vector& x) {
    SparseMatrix hess(dim, dim);
    hess.reserve(Eigen::VectorXi::Constant(dim, 1));
    for (Index i = 0; i < dim; ++i) hess.insert(i, i) = area * x[i];
    hess.makeCompressed();
    return hess;
  };
  cb.multilinear = [area](std::span<const Vector> args) {
    if (args.size() != 3) throw std::invalid_argument("zk: multilinear form takes 3 arguments");
    return area * (args[0].array() * args[1].array() * args[2].array()).sum() / 6.0;
  };
  auto u = PolynomialPotential::from_callbacks(dim, 3, true, iota(dim), std::move(cb));

  Vector x0(dim);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      x0[i * n + j] = zk_initial_profile(static_cast<double>(i) * h, static_cast<double>(j) * h, params.length);
  return {"zk", std::make_shared<const SemilinearSystem>(std::move(q), std::move(m), std::move(u)),
          std::move(x0)};
}

Model build_model(const ModelConfig& config) {
  switch (config.id) {
    case ModelId::henon_heiles: return henon_heiles();
    case ModelId::fpu: return fpu(config.fpu);
    case ModelId::zk: return zk(config.zk);
  }
  throw std::invalid_argument("build_model: unknown model");
}

}  // namespace ekahan
