#include "ekahan/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "ekahan/polynomial.hpp"

namespace ekahan {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_conservative(const SemilinearSystem& sys, const char* what) {
  if (!sys.conservative())
    throw std::invalid_argument(std::string(what) + ": the structure matrix is not skew-symmetric");
}

void require_homogeneous_degree(const PolynomialPotential& u, int degree, const char* what) {
  if (u.is_zero()) return;
  if (!u.homogeneous() || u.degree() != degree) {
    std::ostringstream os;
    os << what << ": needs a homogeneous potential of degree " << degree << ", have degree "
       << u.degree() << (u.homogeneous() ? "" : " (inhomogeneous)");
    throw std::invalid_argument(os.str());
  }
}

double ubar(const PolynomialPotential& u, std::span<const Vector> args) {
  if (u.is_zero()) return 0.0;
  return multilinear_U(u, args);
}

std::size_t reference_stride(const Trajectory& traj, const Trajectory& ref) {
  if (!(ref.h > 0.0) || !(traj.h > 0.0)) throw std::invalid_argument("global_error: step sizes must be positive");
  const double ratio = traj.h / ref.h;
  const double stride = std::round(ratio);
  if (stride < 1.0 || std::abs(ratio - stride) > 1e-9 * ratio)
    throw std::invalid_argument("global_error: reference step does not divide the trajectory step");
  return static_cast<std::size_t>(stride);
}

double max_finite(const std::vector<double>& v) {
  double m = 0.0;
  bool any = false;
  for (double x : v)
    if (std::isfinite(x)) {
      m = any ? std::max(m, x) : x;
      any = true;
    }
  return any ? m : kNaN;
}

}  // namespace

double global_error(const Trajectory& traj, const Trajectory& ref) {
  if (traj.states.empty()) throw std::invalid_argument("global_error: empty trajectory");
  const std::size_t stride = reference_stride(traj, ref);
  const std::size_t last = (traj.size() - 1) * stride;
  if (last >= ref.size()) {
    std::ostringstream os;
    os << "global_error: reference has " << ref.size() << " states, needs " << last + 1;
    throw std::invalid_argument(os.str());
  }
  double err = 0.0;
  for (std::size_t n = 0; n < traj.size(); ++n) {
    const std::size_t m = n * stride;
    if (!traj.times.empty() && !ref.times.empty()) {
      const double t = traj.times[n];
      if (std::abs(t - ref.times[m]) > 1e-9 * std::max(1.0, std::abs(t)))
        throw std::invalid_argument("global_error: time grids do not match");
    }
    if (traj.states[n].size() != ref.states[m].size())
      throw std::invalid_argument("global_error: dimension mismatch");
    err = std::max(err, (traj.states[n] - ref.states[m]).norm());
  }
  return err;
}

EnergyDeviation energy_deviation_cubic(const SemilinearSystem& sys, const Vector& x0, const Vector& x1) {
  require_conservative(sys, "energy_deviation_cubic");
  require_homogeneous_degree(sys.potential(), 3, "energy_deviation_cubic");
  EnergyDeviation d;
  d.actual = sys.energy(x1) - sys.energy(x0);
  d.predicted = sys.potential().value(x1 - x0);
  d.residual = std::abs(d.actual - d.predicted);
  return d;
}

double multistep_energy(const SemilinearSystem& sys, std::span<const Vector> window) {
  const auto k = window.size();
  if (k == 0) throw std::invalid_argument("multistep_energy: empty window");
  double quad = 0.0;
  for (const auto& x : window) quad += x.dot(sys.apply_quadratic(x));
  std::vector<Vector> args(window.begin(), window.end());
  args.push_back(window.front());
  args.push_back(window.back());
  return quad / (2.0 * static_cast<double>(k)) + ubar(sys.potential(), args);
}

EnergyDeviation energy_deviation_highorder(const SemilinearSystem& sys, std::span<const Vector> window) {
  require_conservative(sys, "energy_deviation_highorder");
  if (window.size() < 2) throw std::invalid_argument("energy_deviation_highorder: need k+1 >= 2 states");
  const std::size_t k = window.size() - 1;
  const auto& u = sys.potential();
  require_homogeneous_degree(u, static_cast<int>(k) + 2, "energy_deviation_highorder");

  EnergyDeviation d;
  d.actual = multistep_energy(sys, window.subspan(1)) - multistep_energy(sys, window.first(k));

  std::vector<Vector> a(window.begin() + 1, window.end());
  a.push_back(window[k]);
  a.push_back(window[1] - window[0]);
  std::vector<Vector> b(window.begin(), window.begin() + static_cast<std::ptrdiff_t>(k));
  b.push_back(window[0]);
  b.push_back(window[k] - window[k - 1]);
  std::vector<Vector> c(window.begin(), window.end());
  c.push_back((window[k] - window[0]) / static_cast<double>(k));
  d.predicted = ubar(u, a) + ubar(u, b) - 2.0 * ubar(u, c);
  d.residual = std::abs(d.actual - d.predicted);
  return d;
}

double quadratic_identity_residual(const SemilinearSystem& sys, const Vector& x0, const Vector& x1,
                                   const Vector& discrete_gradient) {
  if (x0.size() != sys.dim() || x1.size() != sys.dim() || discrete_gradient.size() != sys.dim())
    throw std::invalid_argument("quadratic_identity_residual: dimension mismatch");
  return std::abs(0.5 * x1.dot(sys.apply_quadratic(x1)) - 0.5 * x0.dot(sys.apply_quadratic(x0)) +
                  (x1 - x0).dot(discrete_gradient));
}

double multistep_quadratic_residual(const SemilinearSystem& sys, std::span<const Vector> window) {
  if (window.size() < 2) throw std::invalid_argument("multistep_quadratic_residual: need k+1 >= 2 states");
  for (const auto& x : window)
    if (x.size() != sys.dim()) throw std::invalid_argument("multistep_quadratic_residual: dimension mismatch");
  const auto k = static_cast<double>(window.size() - 1);
  const Vector& first = window.front();
  const Vector& last = window.back();
  const auto& u = sys.potential();
  const Vector grad = u.is_zero() ? Vector::Zero(sys.dim()) : polarized_gradient(u, window);
  return std::abs((last.dot(sys.apply_quadratic(last)) - first.dot(sys.apply_quadratic(first))) / (2.0 * k) +
                  (last - first).dot(grad) / k);
}

Vector scheme_discrete_gradient(Scheme scheme, const PolynomialPotential& u, const Vector& x0,
                                const Vector& x1) {
  switch (scheme) {
    case Scheme::ekahan:
    case Scheme::kahan: return kahan_gradient(u, x0, x1);
    case Scheme::eavf: return avf_gradient(u, x1, x0);
    case Scheme::exp_euler: return u.gradient(x0);
    default: break;
  }
  throw std::invalid_argument(std::string("scheme_discrete_gradient: no two-point gradient for ") +
                              std::string(scheme_name(scheme)));
}

double convergence_slope(std::span<const std::pair<double, double>> points) {
  if (points.size() < 3) throw std::invalid_argument("convergence_slope: need at least 3 points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto [h, e] = points[i];
    if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("convergence_slope: h must be positive");
    if (!(e > 0.0) || !std::isfinite(e)) throw std::invalid_argument("convergence_slope: errors must be positive");
    if (i > 0 && !(h < points[i - 1].first))
      throw std::invalid_argument("convergence_slope: h must be strictly decreasing");
  }
  const auto n = static_cast<double>(points.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& [h, e] : points) {
    sx += std::log(h);
    sy += std::log(e);
  }
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [h, e] : points) {
    const double dx = std::log(h) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(e) - my);
  }
  return sxy / sxx;
}

bool no_energy_drift(std::span<const double> series) {
  if (series.size() < 2) return true;
  const std::size_t half = series.size() / 2;
  double first = 0.0, second = 0.0;
  for (std::size_t i = 0; i < half; ++i) first = std::max(first, std::abs(series[i]));
  for (std::size_t i = half; i < series.size(); ++i) second = std::max(second, std::abs(series[i]));
  return second <= 2.0 * first;
}

double EnergyReport::max_residual() const { return max_finite(residual); }
double EnergyReport::max_quadratic_residual() const { return max_finite(quadratic_residual); }
double EnergyReport::max_energy_error() const { return max_finite(energy_error); }

double EnergyReport::max_abs_energy() const {
  double m = 0.0;
  for (double e : energies)
    if (std::isfinite(e)) m = std::max(m, std::abs(e));
  return m;
}

EnergyReport energy_report(const SemilinearSystem& sys, Scheme scheme, int window, const Trajectory& traj,
                           const Trajectory* reference) {
  if (window < 1) throw std::invalid_argument("energy_report: window must be >= 1");
  const auto k = static_cast<std::size_t>(window);
  const auto& u = sys.potential();
  const bool polarized = scheme == Scheme::ekahan_polarized;
  if (!polarized && k != 1) throw std::invalid_argument("energy_report: one-step schemes use window 1");

  EnergyReport r;
  if (traj.size() < k) return r;
  const std::size_t count = traj.size() - k + 1;
  const std::span<const Vector> states(traj.states);

  r.times.assign(traj.times.begin(), traj.times.begin() + static_cast<std::ptrdiff_t>(count));
  r.energies.resize(count);
  for (std::size_t n = 0; n < count; ++n)
    r.energies[n] = polarized ? multistep_energy(sys, states.subspan(n, k)) : sys.energy(states[n]);

  r.energy_error.assign(count, kNaN);
  if (sys.conservative()) {
    for (std::size_t n = 0; n < count; ++n) r.energy_error[n] = std::abs(r.energies[n] - r.energies[0]);
  } else if (reference) {
    const std::size_t stride = reference_stride(traj, *reference);
    for (std::size_t n = 0; n < count && n * stride < reference->size(); ++n)
      r.energy_error[n] = std::abs(r.energies[n] - sys.energy(reference->states[n * stride]));
  }

  const bool cubic = !u.is_zero() && u.homogeneous() && u.degree() == 3;
  const bool identity_available =
      sys.conservative() &&
      (polarized ? (u.is_zero() || (u.homogeneous() && u.degree() == window + 2))
                 : (scheme == Scheme::eavf || scheme == Scheme::crk6 || cubic || u.is_zero()));
  const bool two_point = scheme == Scheme::ekahan || scheme == Scheme::kahan || scheme == Scheme::eavf ||
                         scheme == Scheme::exp_euler;

  r.deviation_actual.assign(count, 0.0);
  r.deviation_predicted.assign(count, identity_available ? 0.0 : kNaN);
  r.residual.assign(count, identity_available ? 0.0 : kNaN);
  r.quadratic_residual.assign(count, (sys.conservative() && (polarized || two_point)) ? 0.0 : kNaN);

  for (std::size_t n = 1; n < count; ++n) {
    r.deviation_actual[n] = r.energies[n] - r.energies[n - 1];
    if (identity_available) {
      if (polarized) {
        const auto dev = energy_deviation_highorder(sys, states.subspan(n - 1, k + 1));
        r.deviation_predicted[n] = dev.predicted;
      } else if (scheme == Scheme::eavf || scheme == Scheme::crk6 || u.is_zero()) {
        r.deviation_predicted[n] = 0.0;
      } else {
        r.deviation_predicted[n] = u.value(states[n] - states[n - 1]);
      }
      r.residual[n] = std::abs(r.deviation_actual[n] - r.deviation_predicted[n]);
    }
    if (sys.conservative()) {
      if (polarized) {
        r.quadratic_residual[n] = multistep_quadratic_residual(sys, states.subspan(n - 1, k + 1));
      } else if (two_point) {
        const Vector g = scheme_discrete_gradient(scheme, u, states[n - 1], states[n]);
        r.quadratic_residual[n] = quadratic_identity_residual(sys, states[n - 1], states[n], g);
      }
    }
  }
  return r;
}

}  // namespace ekahan
