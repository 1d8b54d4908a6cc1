#include "ekahan/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ekahan/quadrature.hpp"

namespace ekahan {

namespace {

double ipow(double x, int p) {
  double r = 1.0;
  for (int i = 0; i < p; ++i) r *= x;
  return r;
}

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

void require_same_dims(const PolynomialPotential& u, std::span<const Vector> xs, const char* what) {
  for (const auto& x : xs) {
    if (x.size() != u.dim()) {
      std::ostringstream os;
      os << what << ": expected dimension " << u.dim() << ", got " << x.size();
      throw std::invalid_argument(os.str());
    }
  }
}

// prod_k x[var_k]^{power_k}, with the powers of factors skip_a and skip_b
// lowered by drop_a and drop_b.
double partial_product(const Monomial& t, const Vector& x, std::size_t skip_a, int drop_a,
                       std::size_t skip_b, int drop_b) {
  double r = 1.0;
  for (std::size_t k = 0; k < t.factors.size(); ++k) {
    const auto [var, power] = t.factors[k];
    int p = power;
    if (k == skip_a) p -= drop_a;
    if (k == skip_b) p -= drop_b;
    r *= ipow(x[var], p);
  }
  return r;
}

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

}  // namespace

int Monomial::degree() const {
  int d = 0;
  for (const auto& f : factors) d += f.second;
  return d;
}

PolynomialPotential PolynomialPotential::zero(Index dim) {
  if (dim < 0) throw std::invalid_argument("PolynomialPotential: negative dimension");
  PolynomialPotential u;
  u.dim_ = dim;
  u.index_support();
  return u;
}

PolynomialPotential PolynomialPotential::from_monomials(Index dim, std::vector<Monomial> terms) {
  PolynomialPotential u = zero(dim);
  std::set<Index> support;
  std::set<int> degrees;
  for (auto& t : terms) {
    if (!std::isfinite(t.coefficient))
      throw std::invalid_argument("PolynomialPotential: non-finite coefficient");
    if (t.coefficient == 0.0) continue;
    std::erase_if(t.factors, [](const auto& f) { return f.second == 0; });
    std::sort(t.factors.begin(), t.factors.end());
    for (std::size_t k = 0; k < t.factors.size(); ++k) {
      const auto [var, power] = t.factors[k];
      if (var < 0 || var >= dim) throw std::invalid_argument("PolynomialPotential: variable out of range");
      if (power < 0) throw std::invalid_argument("PolynomialPotential: negative exponent");
      if (k > 0 && t.factors[k - 1].first == var)
        throw std::invalid_argument("PolynomialPotential: repeated variable in a monomial");
      support.insert(var);
    }
    degrees.insert(t.degree());
    u.terms_.push_back(std::move(t));
  }
  u.support_.assign(support.begin(), support.end());
  u.index_support();
  u.degree_ = degrees.empty() ? 0 : *degrees.rbegin();
  u.homogeneous_ = degrees.size() <= 1;
  return u;
}

PolynomialPotential PolynomialPotential::from_callbacks(Index dim, int degree, bool homogeneous,
                                                        std::vector<Index> support,
                                                        PotentialCallbacks callbacks) {
  if (!callbacks.value || !callbacks.gradient || !callbacks.hessian_vector)
    throw std::invalid_argument("PolynomialPotential: value, gradient and hessian_vector are required");
  if (degree < 0) throw std::invalid_argument("PolynomialPotential: negative degree");
  PolynomialPotential u = zero(dim);
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());
  for (Index s : support)
    if (s < 0 || s >= dim) throw std::invalid_argument("PolynomialPotential: support index out of range");
  u.degree_ = degree;
  u.homogeneous_ = homogeneous;
  u.support_ = std::move(support);
  u.index_support();
  u.callbacks_ = std::make_shared<const PotentialCallbacks>(std::move(callbacks));
  return u;
}

void PolynomialPotential::index_support() {
  support_position_.assign(static_cast<std::size_t>(dim_), -1);
  for (std::size_t i = 0; i < support_.size(); ++i)
    support_position_[static_cast<std::size_t>(support_[i])] = static_cast<Index>(i);
}

void PolynomialPotential::check_dim(const Vector& x, const char* what) const {
  if (x.size() != dim_) {
    std::ostringstream os;
    os << what << ": expected dimension " << dim_ << ", got " << x.size();
    throw std::invalid_argument(os.str());
  }
}

double PolynomialPotential::value(const Vector& x) const {
  check_dim(x, "PolynomialPotential::value");
  if (callbacks_) return callbacks_->value(x);
  double s = 0.0;
  for (const auto& t : terms_) s += t.coefficient * partial_product(t, x, kNone, 0, kNone, 0);
  return s;
}

Vector PolynomialPotential::gradient(const Vector& x) const {
  check_dim(x, "PolynomialPotential::gradient");
  if (callbacks_) return callbacks_->gradient(x);
  Vector g = Vector::Zero(dim_);
  for (const auto& t : terms_) {
    for (std::size_t a = 0; a < t.factors.size(); ++a) {
      const auto [var, power] = t.factors[a];
      g[var] += t.coefficient * power * partial_product(t, x, a, 1, kNone, 0);
    }
  }
  return g;
}

Vector PolynomialPotential::hessian_vector(const Vector& x, const Vector& v) const {
  check_dim(x, "PolynomialPotential::hessian_vector");
  check_dim(v, "PolynomialPotential::hessian_vector");
  if (callbacks_) return callbacks_->hessian_vector(x, v);
  return hessian(x) * v;
}

SparseMatrix PolynomialPotential::hessian(const Vector& x) const {
  check_dim(x, "PolynomialPotential::hessian");
  if (callbacks_) {
    if (callbacks_->hessian) return callbacks_->hessian(x);
    // Probe the support columns with unit vectors.
    std::vector<Eigen::Triplet<double>> triplets;
    Vector e = Vector::Zero(dim_);
    for (Index j : support_) {
      e[j] = 1.0;
      const Vector col = callbacks_->hessian_vector(x, e);
      e[j] = 0.0;
      for (Index i : support_)
        if (col[i] != 0.0) triplets.emplace_back(i, j, col[i]);
    }
    SparseMatrix h(dim_, dim_);
    h.setFromTriplets(triplets.begin(), triplets.end());
    return h;
  }
  std::vector<Eigen::Triplet<double>> triplets;
  for (const auto& t : terms_) {
    const std::size_t nf = t.factors.size();
    for (std::size_t a = 0; a < nf; ++a) {
      const auto [va, pa] = t.factors[a];
      if (pa >= 2)
        triplets.emplace_back(va, va,
                              t.coefficient * pa * (pa - 1) * partial_product(t, x, a, 2, kNone, 0));
      for (std::size_t b = a + 1; b < nf; ++b) {
        const auto [vb, pb] = t.factors[b];
        const double val = t.coefficient * pa * pb * partial_product(t, x, a, 1, b, 1);
        triplets.emplace_back(va, vb, val);
        triplets.emplace_back(vb, va, val);
      }
    }
  }
  SparseMatrix h(dim_, dim_);
  h.setFromTriplets(triplets.begin(), triplets.end());
  return h;
}

SparseMatrix PolynomialPotential::support_hessian(const Vector& x) const {
  check_dim(x, "PolynomialPotential::support_hessian");
  const auto r = static_cast<Index>(support_.size());
  std::vector<Eigen::Triplet<double>> triplets;
  auto pos = [this](Index v) { return support_position_[static_cast<std::size_t>(v)]; };
  if (callbacks_ && !callbacks_->hessian) {
    Vector e = Vector::Zero(dim_);
    for (Index j = 0; j < r; ++j) {
      e[support_[static_cast<std::size_t>(j)]] = 1.0;
      const Vector col = callbacks_->hessian_vector(x, e);
      e[support_[static_cast<std::size_t>(j)]] = 0.0;
      for (Index i = 0; i < r; ++i)
        if (const double v = col[support_[static_cast<std::size_t>(i)]]; v != 0.0) triplets.emplace_back(i, j, v);
    }
  } else if (callbacks_) {
    const SparseMatrix full = callbacks_->hessian(x);
    for (Index col = 0; col < full.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(full, col); it; ++it)
        if (pos(it.row()) >= 0 && pos(it.col()) >= 0) triplets.emplace_back(pos(it.row()), pos(it.col()), it.value());
  } else {
    for (const auto& t : terms_) {
      const std::size_t nf = t.factors.size();
      for (std::size_t a = 0; a < nf; ++a) {
        const auto [va, pa] = t.factors[a];
        if (pa >= 2)
          triplets.emplace_back(pos(va), pos(va), t.coefficient * pa * (pa - 1) * partial_product(t, x, a, 2, kNone, 0));
        for (std::size_t b = a + 1; b < nf; ++b) {
          const auto [vb, pb] = t.factors[b];
          const double val = t.coefficient * pa * pb * partial_product(t, x, a, 1, b, 1);
          triplets.emplace_back(pos(va), pos(vb), val);
          triplets.emplace_back(pos(vb), pos(va), val);
        }
      }
    }
  }
  SparseMatrix h(r, r);
  h.setFromTriplets(triplets.begin(), triplets.end());
  return h;
}

Matrix PolynomialPotential::support_hessian_dense(const Vector& x) const {
  if (callbacks_) return Matrix(support_hessian(x));
  check_dim(x, "PolynomialPotential::support_hessian_dense");
  const auto r = static_cast<Index>(support_.size());
  Matrix h = Matrix::Zero(r, r);
  auto pos = [this](Index v) { return support_position_[static_cast<std::size_t>(v)]; };
  for (const auto& t : terms_) {
    const std::size_t nf = t.factors.size();
    for (std::size_t a = 0; a < nf; ++a) {
      const auto [va, pa] = t.factors[a];
      if (pa >= 2) h(pos(va), pos(va)) += t.coefficient * pa * (pa - 1) * partial_product(t, x, a, 2, kNone, 0);
      for (std::size_t b = a + 1; b < nf; ++b) {
        const auto [vb, pb] = t.factors[b];
        const double val = t.coefficient * pa * pb * partial_product(t, x, a, 1, b, 1);
        h(pos(va), pos(vb)) += val;
        h(pos(vb), pos(va)) += val;
      }
    }
  }
  return h;
}

double PolynomialPotential::multilinear_direct(std::span<const Vector> args) const {
  const int d = static_cast<int>(args.size());
  require_same_dims(*this, args, "multilinear_U");
  if (!homogeneous_ || (d != degree_ && !is_zero())) {
    std::ostringstream os;
    os << "multilinear_U: needs a homogeneous potential of degree " << d << ", have degree "
       << degree_ << (homogeneous_ ? "" : " (nonhomogeneous)");
    throw std::invalid_argument(os.str());
  }
  if (callbacks_) {
    if (!callbacks_->multilinear) throw std::logic_error("multilinear_U: no tensor route for this potential");
    return callbacks_->multilinear(args);
  }
  // Each monomial c * x_{w_1} ... x_{w_d} polarizes to
  // (c / d!) * sum over permutations pi of prod_s args[pi(s)][w_s].
  double total = 0.0;
  std::vector<Index> vars;
  std::vector<int> perm(d);
  for (const auto& t : terms_) {
    vars.clear();
    for (const auto& [var, power] : t.factors)
      for (int p = 0; p < power; ++p) vars.push_back(var);
    std::iota(perm.begin(), perm.end(), 0);
    double permanent = 0.0;
    do {
      double prod = 1.0;
      for (int s = 0; s < d; ++s) prod *= args[perm[s]][vars[s]];
      permanent += prod;
    } while (std::next_permutation(perm.begin(), perm.end()));
    total += t.coefficient * permanent / factorial(d);
  }
  return total;
}

Vector kahan_gradient(const PolynomialPotential& u, const Vector& a, const Vector& b) {
  if (u.degree() > 3) throw std::invalid_argument("kahan_gradient: potential degree exceeds 3");
  const Vector pts[] = {a, b};
  require_same_dims(u, pts, "kahan_gradient");
  const Vector mid = 0.5 * (a + b);
  return -0.5 * u.gradient(a) + 2.0 * u.gradient(mid) - 0.5 * u.gradient(b);
}

Vector polarized_gradient(const PolynomialPotential& u, std::span<const Vector> points) {
  const int m = static_cast<int>(points.size());
  if (m < 1) throw std::invalid_argument("polarized_gradient: need at least one point");
  require_same_dims(u, points, "polarized_gradient");
  if (u.is_zero()) return Vector::Zero(u.dim());
  if (!u.homogeneous() || u.degree() != m + 1) {
    std::ostringstream os;
    os << "polarized_gradient: " << m << " points need a homogeneous potential of degree " << m + 1
       << ", have degree " << u.degree();
    throw std::invalid_argument(os.str());
  }
  if (m > 20) throw std::invalid_argument("polarized_gradient: too many points");
  const double scale = 1.0 / factorial(m);
  Vector result = Vector::Zero(u.dim());
  Vector sum(u.dim());
  const unsigned full = (1u << m);
  for (unsigned mask = 1; mask < full; ++mask) {
    sum.setZero();
    int count = 0;
    for (int i = 0; i < m; ++i) {
      if (mask & (1u << i)) {
        sum += points[i];
        ++count;
      }
    }
    const double sign = ((m - count) % 2 == 0) ? 1.0 : -1.0;
    result += (sign * scale) * u.gradient(sum);
  }
  return result;
}

double polarization_sum(const PolynomialPotential& u, std::span<const Vector> args) {
  const int d = static_cast<int>(args.size());
  if (d < 1) throw std::invalid_argument("polarization_sum: need at least one argument");
  require_same_dims(u, args, "polarization_sum");
  if (d > 20) throw std::invalid_argument("polarization_sum: too many arguments");
  double total = 0.0;
  Vector sum(u.dim());
  for (unsigned mask = 1; mask < (1u << d); ++mask) {
    sum.setZero();
    int count = 0;
    for (int i = 0; i < d; ++i) {
      if (mask & (1u << i)) {
        sum += args[i];
        ++count;
      }
    }
    const double sign = ((d - count) % 2 == 0) ? 1.0 : -1.0;
    total += sign * u.value(sum);
  }
  return total / factorial(d);
}

double multilinear_U(const PolynomialPotential& u, std::span<const Vector> args) {
  const int d = static_cast<int>(args.size());
  require_same_dims(u, args, "multilinear_U");
  if (u.is_zero()) return 0.0;
  if (!u.homogeneous() || u.degree() != d) {
    std::ostringstream os;
    os << "multilinear_U: " << d << " arguments need a homogeneous potential of degree " << d
       << ", have degree " << u.degree();
    throw std::invalid_argument(os.str());
  }
  if (u.has_monomials() || u.has_multilinear_fast_path()) return u.multilinear_direct(args);
  return polarization_sum(u, args);
}

int avf_quadrature_nodes(int degree) { return std::max(1, (degree + 1) / 2); }

Vector avf_gradient(const PolynomialPotential& u, const Vector& a, const Vector& b) {
  const Vector pts[] = {a, b};
  require_same_dims(u, pts, "avf_gradient");
  const QuadratureRule& rule = gauss_legendre_cached(avf_quadrature_nodes(u.degree()));
  Vector result = Vector::Zero(u.dim());
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double xi = rule.nodes[i];
    result += rule.weights[i] * u.gradient(xi * a + (1.0 - xi) * b);
  }
  return result;
}

PolynomialPotential homogenize(const PolynomialPotential& u) {
  const Index n = u.dim();
  if (u.has_monomials()) {
    const int d = u.degree();
    std::vector<Monomial> terms;
    for (const auto& t : u.monomials()) {
      Monomial h;
      h.coefficient = t.coefficient;
      if (t.degree() < d) h.factors.emplace_back(0, d - t.degree());
      for (const auto& [var, power] : t.factors) h.factors.emplace_back(var + 1, power);
      terms.push_back(std::move(h));
    }
    return PolynomialPotential::from_monomials(n + 1, std::move(terms));
  }
  if (!u.homogeneous())
    throw std::invalid_argument("homogenize: callback potentials must already be homogeneous");
  // Homogeneous already: pad with an inert leading coordinate.
  auto drop = [](const Vector& x) -> Vector { return x.tail(x.size() - 1); };
  auto pad = [n](const Vector& g) -> Vector {
    Vector out = Vector::Zero(n + 1);
    out.tail(n) = g;
    return out;
  };
  PotentialCallbacks cb;
  cb.value = [u, drop](const Vector& x) { return u.value(drop(x)); };
  cb.gradient = [u, drop, pad](const Vector& x) { return pad(u.gradient(drop(x))); };
  cb.hessian_vector = [u, drop, pad](const Vector& x, const Vector& v) {
    return pad(u.hessian_vector(drop(x), drop(v)));
  };
  std::vector<Index> support;
  for (Index s : u.support()) support.push_back(s + 1);
  return PolynomialPotential::from_callbacks(n + 1, u.degree(), true, std::move(support), std::move(cb));
}

}  // namespace ekahan
