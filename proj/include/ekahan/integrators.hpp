#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ekahan/linalg.hpp"
#include "ekahan/system.hpp"

namespace ekahan {

enum class Scheme { ekahan, kahan, eavf, exp_euler, crk6, ekahan_polarized };

std::string_view scheme_name(Scheme scheme);
std::optional<Scheme> parse_scheme(std::string_view name);

/// Fixed-point settings for the fully implicit schemes (EAVF, CRK6). An
/// iteration has converged once the sup-norm of the update drops to
/// tolerance * (1 + |x_n|_inf).
struct SolverSettings {
  double tolerance = 1e-14;
  int max_iterations = 200;
};

struct StepStats {
  int iterations = 0;
  double residual = 0.0;
};

/// A step could not be completed (singular step matrix, no convergence).
class StepFailure : public std::runtime_error {
 public:
  StepFailure(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// A time-stepping map for a fixed system and step size h, with every
/// h-dependent operator computed at construction.
///
/// `advance` consumes the last `window()` states (oldest first) and returns
/// the next one. One-step schemes have window() == 1.
class IntegratorStep {
 public:
  IntegratorStep(SystemPtr system, Scheme scheme, double h);
  virtual ~IntegratorStep() = default;

  IntegratorStep(const IntegratorStep&) = delete;
  IntegratorStep& operator=(const IntegratorStep&) = delete;

  Scheme scheme() const { return scheme_; }
  double step_size() const { return h_; }
  const SemilinearSystem& system() const { return *system_; }
  const SystemPtr& system_ptr() const { return system_; }
  virtual int window() const { return 1; }

  virtual Vector advance(std::span<const Vector> window, StepStats* stats = nullptr) const = 0;

  /// Single-step convenience for window() == 1.
  Vector step(const Vector& x, StepStats* stats = nullptr) const;

 protected:
  void check_window(std::span<const Vector> window) const;

  SystemPtr system_;
  Scheme scheme_;
  double h_;
};

/// e^{tA}, phi(tA) and the block phi(tA) Q P, where P selects the coordinates
/// the potential depends on (its support). Nonlinear terms Q grad U only
/// enter through that block.
struct ExponentialBlock {
  double t = 0.0;
  Matrix exp_ta;
  Matrix phi_ta;
  std::vector<Index> support;
  Matrix phi_q_support;  // n x r
  Matrix phi_q_rows;     // r x r: rows `support` of phi_q_support

  static ExponentialBlock compute(const SemilinearSystem& system, double t);
  /// The identity e^{tA} = I + tA phi(tA), max-abs residual.
  double identity_residual(const Matrix& a) const;
};

/// x_{n+1} = e^{hA} x_n + h phi(hA) f(x_n)
class ExpEulerStep final : public IntegratorStep {
 public:
  ExpEulerStep(SystemPtr system, double h);
  Vector advance(std::span<const Vector> window, StepStats* stats = nullptr) const override;
  const ExponentialBlock& operators() const { return ops_; }

 private:
  ExponentialBlock ops_;
};

/// EKahan: e^{hA} x_n + h phi(hA) Q [-1/2 gU(x_n) + 2 gU((x_n+x_{n+1})/2) - 1/2 gU(x_{n+1})]
/// for potentials of degree <= 3.
///
/// Since grad U is quadratic the Kahan combination equals
/// gU(x_n) + 1/2 U''(x_n)(x_{n+1} - x_n), so the step is one exponential
/// Euler predictor plus one linear solve restricted to the potential's
/// support:
///   (I - h/2 [phi Q]_rr U''_rr(x_n)) d = P^T (y - x_n),
///   x_{n+1} = y + h/2 phi Q P U''_rr d,
/// which is the same as (I - h/2 phi(hA) Q U''(x_n)) (x_{n+1} - x_n) = h phi(hA) g(x_n).
class EKahanStep final : public IntegratorStep {
 public:
  EKahanStep(SystemPtr system, double h);
  Vector advance(std::span<const Vector> window, StepStats* stats = nullptr) const override;
  const ExponentialBlock& operators() const { return ops_; }

 private:
  static constexpr std::size_t kDenseSupportLimit = 32;

  template <class Hessian>
  Vector kahan_correction(const Hessian& hess, const Vector& x, Vector next, StepStats* stats) const;

  ExponentialBlock ops_;
};

/// Kahan's method x_{n+1} = x_n + h Q [M (x_n + x_{n+1})/2 + kahan_gradient(x_n, x_{n+1})],
/// solved as (I - h/2 Q (M + U''(x_n))) (x_{n+1} - x_n) = h Q grad H(x_n).
class KahanStep final : public IntegratorStep {
 public:
  KahanStep(SystemPtr system, double h);
  Vector advance(std::span<const Vector> window, StepStats* stats = nullptr) const override;

 private:
  Matrix base_;  // I - h/2 A
};

/// Exponential AVF: e^{hA} x_n + h phi(hA) Q int_0^1 grad U(xi x_n + (1-xi) x_{n+1}) dxi,
/// solved by fixed-point iteration from the exponential Euler predictor.
class EavfStep final : public IntegratorStep {
 public:
  EavfStep(SystemPtr system, double h, SolverSettings settings = {});
  Vector advance(std::span<const Vector> window, StepStats* stats = nullptr) const override;
  const ExponentialBlock& operators() const { return ops_; }

 private:
  ExponentialBlock ops_;
  SolverSettings settings_;
};

/// Sixth-order energy-preserving continuous-stage Runge-Kutta method. Three
/// stage values at sigma = 1/3, 2/3, 1 are coupled through the cubic
/// interpolant Y_sigma; the sigma-integrals use 5-point Gauss-Legendre.
/// Used as the reference solver and as the starter for multistep schemes.
class Crk6Step final : public IntegratorStep {
 public:
  Crk6Step(SystemPtr system, double h, SolverSettings settings = {});
  Vector advance(std::span<const Vector> window, StepStats* stats = nullptr) const override;

  /// All three stage values (y_{n+1/3}, y_{n+2/3}, y_{n+1}).
  std::array<Vector, 3> stages(const Vector& y, StepStats* stats = nullptr) const;

 private:
  SolverSettings settings_;
  // Per quadrature node i: interpolation weights for (y_n, y_1/3, y_2/3, y_1)
  // and quadrature weight times the stage kernel for each stage.
  std::array<std::array<double, 4>, 5> lagrange_{};
  std::array<std::array<double, 3>, 5> kernel_{};
};

/// k-step EKahan for homogeneous potentials of degree k+2:
///   x_{n+k} = e^{khA} x_n + kh phi(khA) Q gradU_K(x_n, ..., x_{n+k}),
/// with gradU_K the polarized gradient. gradU_K is linear in its last slot,
/// so x_{n+k} comes from one linear solve whose operator is assembled by
/// probing that slot with unit vectors on the potential's support.
class PolarizedEKahanStep final : public IntegratorStep {
 public:
  PolarizedEKahanStep(SystemPtr system, double h, int k);
  int window() const override { return k_; }
  int order_k() const { return k_; }
  Vector advance(std::span<const Vector> window, StepStats* stats = nullptr) const override;
  const ExponentialBlock& operators() const { return ops_; }

 private:
  int k_;
  ExponentialBlock ops_;  // at t = k h
};

struct StepOptions {
  SolverSettings solver;
  /// k for the polarized scheme; 0 derives it from the potential degree.
  int polarization_k = 0;
};

std::unique_ptr<IntegratorStep> make_step(SystemPtr system, Scheme scheme, double h,
                                          const StepOptions& options = {});

struct IntegrationFailure {
  std::size_t step_index = 0;  // index of the state that could not be produced
  std::string message;
  double residual = 0.0;
};

/// States x_0 .. x_N at t_0 + n h.
struct Trajectory {
  double h = 0.0;
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<StepStats> stats;  // stats[n] belongs to the step producing states[n]
  std::optional<IntegrationFailure> failure;

  std::size_t size() const { return states.size(); }
  bool complete() const { return !failure; }
};

/// Starting values for multistep schemes, produced by CRK6 with `substeps`
/// internal steps per output step.
struct StarterOptions {
  int substeps = 8;
  SolverSettings solver;
};

/// Number of steps N with N h = T; throws if T is not a multiple of h.
std::size_t step_count(double h, double t_final);

/// Integrates from t0 to t0 + T. A failed step ends the run early; the
/// partial trajectory carries the failure.
Trajectory integrate(const IntegratorStep& step, const Vector& x0, double t_final, double t0 = 0.0,
                     const StarterOptions& starter = {});

/// CRK6 with step h / substeps, sampled every h.
Trajectory reference_solution(SystemPtr system, const Vector& x0, double h, std::size_t steps,
                              int substeps, const SolverSettings& settings = {});

}  // namespace ekahan
