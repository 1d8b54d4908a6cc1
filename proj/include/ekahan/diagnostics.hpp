#pragma once

#include <span>
#include <utility>
#include <vector>

#include "ekahan/integrators.hpp"
#include "ekahan/system.hpp"

namespace ekahan {

/// max_n |y_n - y(t_n)|_2. `ref` may be sampled on a finer grid whose step
/// divides traj.h; the matching nodes are compared. Throws on grid mismatch.
double global_error(const Trajectory& traj, const Trajectory& ref);

struct EnergyDeviation {
  double actual = 0.0;
  double predicted = 0.0;
  double residual = 0.0;
};

/// H(x1) - H(x0) against U(x1 - x0). Requires a conservative system with a
/// homogeneous cubic potential.
EnergyDeviation energy_deviation_cubic(const SemilinearSystem& sys, const Vector& x0, const Vector& x1);

/// Discrete energy of a k-state window x_n .. x_{n+k-1}:
/// (1/2k) sum x^T M x + Ubar(x_n, ..., x_{n+k-1}, x_n, x_{n+k-1}).
/// For k = 1 this is H(x_n).
double multistep_energy(const SemilinearSystem& sys, std::span<const Vector> window);

/// Deviation identity for the k-step polarized scheme over a window of k+1
/// consecutive states. Requires a conservative system with a homogeneous
/// potential of degree k+2.
EnergyDeviation energy_deviation_highorder(const SemilinearSystem& sys, std::span<const Vector> window);

/// |1/2 x1^T M x1 - 1/2 x0^T M x0 + (x1 - x0)^T g| for a discrete gradient g.
double quadratic_identity_residual(const SemilinearSystem& sys, const Vector& x0, const Vector& x1,
                                   const Vector& discrete_gradient);

/// The multistep counterpart over a window x_n .. x_{n+k}:
/// |(1/2k)(x_{n+k}^T M x_{n+k} - x_n^T M x_n) + (1/k)(x_{n+k} - x_n)^T gradU_K|.
double multistep_quadratic_residual(const SemilinearSystem& sys, std::span<const Vector> window);

/// The discrete gradient a one-step scheme uses between x0 and x1 (Kahan's
/// for ekahan and kahan, the averaged gradient for eavf). Throws for schemes
/// without a two-point discrete gradient.
Vector scheme_discrete_gradient(Scheme scheme, const PolynomialPotential& u, const Vector& x0,
                                const Vector& x1);

/// Least-squares slope of log E against log h. Needs at least 3 points with
/// strictly decreasing h and positive errors.
double convergence_slope(std::span<const std::pair<double, double>> h_and_error);

/// True when max over the second half of `series` is at most twice the max
/// over the first half.
bool no_energy_drift(std::span<const double> series);

/// Per-step energy bookkeeping for one trajectory.
///
/// energies[n] is the discrete energy at t_n (the window energy for the
/// k-step scheme, defined for n <= N - k + 1). deviation_* and residual are
/// indexed by the step ending at n, with entry 0 set to zero. Series that do
/// not apply (a non-conservative system, or a scheme with no deviation
/// identity) hold NaN.
struct EnergyReport {
  std::vector<double> times;
  std::vector<double> energies;
  std::vector<double> energy_error;
  std::vector<double> deviation_actual;
  std::vector<double> deviation_predicted;
  std::vector<double> residual;
  std::vector<double> quadratic_residual;

  double max_residual() const;
  double max_quadratic_residual() const;
  double max_energy_error() const;
  double max_abs_energy() const;
};

/// `reference`, when given, supplies H(y(t_n)) for the energy error of
/// non-conservative systems; conservative systems compare with H_0.
EnergyReport energy_report(const SemilinearSystem& sys, Scheme scheme, int window,
                           const Trajectory& traj, const Trajectory* reference = nullptr);

}  // namespace ekahan
