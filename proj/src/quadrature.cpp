#include "ekahan/quadrature.hpp"

#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace ekahan {

namespace {

// Returns (P_m(z), P_m'(z)).
std::pair<double, double> legendre(int m, double z) {
  double prev = 1.0;
  double cur = z;
  for (int k = 2; k <= m; ++k) {
    const double next = ((2.0 * k - 1.0) * z * cur - (k - 1.0) * prev) / k;
    prev = cur;
    cur = next;
  }
  return {cur, m * (z * cur - prev) / (z * z - 1.0)};
}

}  // namespace

QuadratureRule gauss_legendre(int m) {
  if (m < 1) throw std::invalid_argument("gauss_legendre: need at least one node");
  QuadratureRule rule;
  rule.nodes.resize(m);
  rule.weights.resize(m);
  for (int i = 0; i < m; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (m + 0.5));
    for (int iter = 0; iter < 100; ++iter) {
      const auto [p, dp] = legendre(m, z);
      const double dz = p / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    const double dp = legendre(m, z).second;
    // Map from [-1, 1] to [0, 1]; nodes ascending.
    rule.nodes[m - 1 - i] = 0.5 * (1.0 + z);
    rule.weights[m - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
  return rule;
}

const QuadratureRule& gauss_legendre_cached(int m) {
  static const std::array<QuadratureRule, 9> small = [] {
    std::array<QuadratureRule, 9> rules;
    for (int k = 1; k < 9; ++k) rules[k] = gauss_legendre(k);
    return rules;
  }();
  if (m >= 1 && m < 9) return small[m];
  static std::mutex lock;
  static std::map<int, QuadratureRule> large;
  const std::lock_guard guard(lock);
  auto it = large.find(m);
  if (it == large.end()) it = large.emplace(m, gauss_legendre(m)).first;
  return it->second;
}

}  // namespace ekahan
