#include "ekahan/integrators.hpp"

#include <cmath>
#include <sstream>

#include "ekahan/polynomial.hpp"
#include "ekahan/quadrature.hpp"

namespace ekahan {

namespace {

double sup_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

Vector gather(const Vector& x, const std::vector<Index>& idx) {
  Vector out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Index>(i)] = x[idx[i]];
  return out;
}

[[noreturn]] void fail_singular(Scheme scheme, const SingularMatrixError& e) {
  std::ostringstream os;
  os << scheme_name(scheme) << ": unstable step, " << e.what();
  throw StepFailure(os.str(), std::numeric_limits<double>::infinity());
}

[[noreturn]] void fail_convergence(Scheme scheme, int iterations, double residual) {
  std::ostringstream os;
  os << scheme_name(scheme) << ": fixed-point iteration did not converge in " << iterations
     << " iterations (last update " << residual << ")";
  throw StepFailure(os.str(), residual);
}

}  // namespace

std::string_view scheme_name(Scheme scheme) {
  switch (scheme) {
    case Scheme::ekahan: return "ekahan";
    case Scheme::kahan: return "kahan";
    case Scheme::eavf: return "eavf";
    case Scheme::exp_euler: return "expeuler";
    case Scheme::crk6: return "crk6";
    case Scheme::ekahan_polarized: return "ekahan_polarized";
  }
  return "unknown";
}

std::optional<Scheme> parse_scheme(std::string_view name) {
  for (Scheme s : {Scheme::ekahan, Scheme::kahan, Scheme::eavf, Scheme::exp_euler, Scheme::crk6,
                   Scheme::ekahan_polarized})
    if (scheme_name(s) == name) return s;
  return std::nullopt;
}

IntegratorStep::IntegratorStep(SystemPtr system, Scheme scheme, double h)
    : system_(std::move(system)), scheme_(scheme), h_(h) {
  if (!system_) throw std::invalid_argument("IntegratorStep: null system");
  if (!std::isfinite(h)) throw std::invalid_argument("IntegratorStep: non-finite step size");
}

Vector IntegratorStep::step(const Vector& x, StepStats* stats) const {
  if (window() != 1) throw std::logic_error("IntegratorStep::step: multistep scheme needs a window");
  const Vector w[] = {x};
  return advance(w, stats);
}

void IntegratorStep::check_window(std::span<const Vector> window) const {
  if (static_cast<int>(window.size()) != this->window()) {
    std::ostringstream os;
    os << scheme_name(scheme_) << ": expected " << this->window() << " starting values, got "
       << window.size();
    throw std::invalid_argument(os.str());
  }
  for (const auto& x : window)
    if (x.size() != system_->dim()) throw std::invalid_argument("IntegratorStep: dimension mismatch");
}

ExponentialBlock ExponentialBlock::compute(const SemilinearSystem& system, double t) {
  ExponentialBlock block;
  block.t = t;
  auto ops = exponential_operators(system.linear_operator(), t);
  block.exp_ta = std::move(ops.exp_ha);
  block.phi_ta = std::move(ops.phi_ha);
  block.support = system.potential().support();
  const Matrix& q = system.structure_matrix();
  Matrix q_cols(q.rows(), static_cast<Index>(block.support.size()));
  for (std::size_t j = 0; j < block.support.size(); ++j)
    q_cols.col(static_cast<Index>(j)) = q.col(block.support[j]);
  block.phi_q_support = block.phi_ta * q_cols;
  block.phi_q_rows.resize(q_cols.cols(), q_cols.cols());
  for (std::size_t i = 0; i < block.support.size(); ++i)
    block.phi_q_rows.row(static_cast<Index>(i)) = block.phi_q_support.row(block.support[i]);
  return block;
}

double ExponentialBlock::identity_residual(const Matrix& a) const {
  const Index n = a.rows();
  return max_abs(exp_ta - Matrix::Identity(n, n) - t * a * phi_ta);
}

// ---------------------------------------------------------------------------

ExpEulerStep::ExpEulerStep(SystemPtr system, double h)
    : IntegratorStep(std::move(system), Scheme::exp_euler, h),
      ops_(ExponentialBlock::compute(*system_, h)) {}

Vector ExpEulerStep::advance(std::span<const Vector> window, StepStats* stats) const {
  check_window(window);
  const Vector& x = window[0];
  Vector next = ops_.exp_ta * x;
  if (!ops_.support.empty())
    next += h_ * (ops_.phi_q_support * gather(system_->potential().gradient(x), ops_.support));
  if (stats) *stats = StepStats{1, 0.0};
  return next;
}

// ---------------------------------------------------------------------------

EKahanStep::EKahanStep(SystemPtr system, double h)
    : IntegratorStep(std::move(system), Scheme::ekahan, h),
      ops_(ExponentialBlock::compute(*system_, h)) {
  if (system_->potential().degree() > 3)
    throw std::invalid_argument("ekahan: potential degree exceeds 3; use the polarized scheme");
}

Vector EKahanStep::advance(std::span<const Vector> window, StepStats* stats) const {
  check_window(window);
  const Vector& x = window[0];
  const auto& u = system_->potential();
  Vector next = ops_.exp_ta * x;
  if (ops_.support.empty()) {
    if (stats) *stats = StepStats{1, 0.0};
    return next;
  }
  next += h_ * (ops_.phi_q_support * gather(u.gradient(x), ops_.support));

  // Small supports take the dense route; it avoids sparse assembly overhead.
  if (ops_.support.size() <= kDenseSupportLimit)
    return kahan_correction(u.support_hessian_dense(x), x, std::move(next), stats);
  return kahan_correction(u.support_hessian(x), x, std::move(next), stats);
}

template <class Hessian>
Vector EKahanStep::kahan_correction(const Hessian& hess, const Vector& x, Vector next, StepStats* stats) const {
  Matrix step_matrix = -(0.5 * h_) * (ops_.phi_q_rows * hess);
  step_matrix.diagonal().array() += 1.0;
  const Vector rhs = gather(next, ops_.support) - gather(x, ops_.support);
  Vector delta;
  try {
    delta = LuSolver(step_matrix).solve(rhs);
  } catch (const SingularMatrixError& e) {
    fail_singular(scheme_, e);
  }
  next += (0.5 * h_) * (ops_.phi_q_support * (hess * delta));
  if (stats) *stats = StepStats{1, sup_norm(step_matrix * delta - rhs)};
  return next;
}

// ---------------------------------------------------------------------------

KahanStep::KahanStep(SystemPtr system, double h) : IntegratorStep(std::move(system), Scheme::kahan, h) {
  if (system_->potential().degree() > 3)
    throw std::invalid_argument("kahan: potential degree exceeds 3");
  const Index n = system_->dim();
  base_ = Matrix::Identity(n, n) - (0.5 * h_) * system_->linear_operator();
}

Vector KahanStep::advance(std::span<const Vector> window, StepStats* stats) const {
  check_window(window);
  const Vector& x = window[0];
  const auto& u = system_->potential();
  Matrix step_matrix = base_;
  if (!u.support().empty()) {
    const SparseMatrix hess = u.hessian(x);
    step_matrix -= (0.5 * h_) * (system_->structure_matrix() * hess);
  }
  const Vector rhs = h_ * system_->vector_field(x);
  Vector delta;
  try {
    delta = LuSolver(step_matrix).solve(rhs);
  } catch (const SingularMatrixError& e) {
    fail_singular(scheme_, e);
  }
  if (stats) *stats = StepStats{1, sup_norm(step_matrix * delta - rhs)};
  return x + delta;
}

// ---------------------------------------------------------------------------

EavfStep::EavfStep(SystemPtr system, double h, SolverSettings settings)
    : IntegratorStep(std::move(system), Scheme::eavf, h),
      ops_(ExponentialBlock::compute(*system_, h)),
      settings_(settings) {}

Vector EavfStep::advance(std::span<const Vector> window, StepStats* stats) const {
  check_window(window);
  const Vector& x = window[0];
  const auto& u = system_->potential();
  const Vector linear = ops_.exp_ta * x;
  if (ops_.support.empty()) {
    if (stats) *stats = StepStats{1, 0.0};
    return linear;
  }
  const double tol = settings_.tolerance * (1.0 + sup_norm(x));
  Vector current = linear + h_ * (ops_.phi_q_support * gather(u.gradient(x), ops_.support));
  double update = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= settings_.max_iterations; ++it) {
    const Vector avf = gather(avf_gradient(u, x, current), ops_.support);
    Vector next = linear + h_ * (ops_.phi_q_support * avf);
    update = sup_norm(next - current);
    current = std::move(next);
    if (!std::isfinite(update)) break;
    if (update <= tol) {
      if (stats) *stats = StepStats{it, update};
      return current;
    }
  }
  fail_convergence(scheme_, settings_.max_iterations, update);
}

// ---------------------------------------------------------------------------

Crk6Step::Crk6Step(SystemPtr system, double h, SolverSettings settings)
    : IntegratorStep(std::move(system), Scheme::crk6, h), settings_(settings) {
  const QuadratureRule rule = gauss_legendre(5);
  for (int i = 0; i < 5; ++i) {
    const double s = rule.nodes[i];
    const double w = rule.weights[i];
    lagrange_[i] = {-(3 * s - 1) * (3 * s - 2) * (s - 1) / 2.0, 3 * s * (3 * s - 2) * (3 * s - 3) / 2.0,
                    -3 * s * (3 * s - 1) * (3 * s - 3) / 2.0, s * (3 * s - 1) * (3 * s - 2) / 2.0};
    kernel_[i] = {w * (37.0 / 27.0 - 32.0 / 9.0 * s + 20.0 / 9.0 * s * s),
                  w * (26.0 / 27.0 + 8.0 / 9.0 * s - 20.0 / 9.0 * s * s), w};
  }
}

std::array<Vector, 3> Crk6Step::stages(const Vector& y, StepStats* stats) const {
  const auto& sys = *system_;
  const auto& u = sys.potential();
  const Index n = sys.dim();
  const Vector slope = sys.vector_field(y);
  std::array<Vector, 3> stage = {y + (h_ / 3.0) * slope, y + (2.0 * h_ / 3.0) * slope, y + h_ * slope};
  const Vector my = sys.apply_quadratic(y);
  const double tol = settings_.tolerance * (1.0 + sup_norm(y));

  std::array<Vector, 3> m_stage;
  std::array<Vector, 3> acc;
  Vector node(n);
  Vector grad(n);
  double update = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= settings_.max_iterations; ++it) {
    for (int s = 0; s < 3; ++s) {
      m_stage[s] = sys.apply_quadratic(stage[s]);
      acc[s] = Vector::Zero(n);
    }
    for (int i = 0; i < 5; ++i) {
      const auto& l = lagrange_[i];
      node = l[0] * y + l[1] * stage[0] + l[2] * stage[1] + l[3] * stage[2];
      grad = l[0] * my + l[1] * m_stage[0] + l[2] * m_stage[1] + l[3] * m_stage[2];
      grad += u.gradient(node);
      for (int s = 0; s < 3; ++s) acc[s] += kernel_[i][s] * grad;
    }
    update = 0.0;
    for (int s = 0; s < 3; ++s) {
      Vector next = y + h_ * sys.apply_structure(acc[s]);
      update = std::max(update, sup_norm(next - stage[s]));
      stage[s] = std::move(next);
    }
    if (!std::isfinite(update)) break;
    if (update <= tol) {
      if (stats) *stats = StepStats{it, update};
      return stage;
    }
  }
  fail_convergence(scheme_, settings_.max_iterations, update);
}

Vector Crk6Step::advance(std::span<const Vector> window, StepStats* stats) const {
  check_window(window);
  return stages(window[0], stats)[2];
}

// ---------------------------------------------------------------------------

PolarizedEKahanStep::PolarizedEKahanStep(SystemPtr system, double h, int k)
    : IntegratorStep(std::move(system), Scheme::ekahan_polarized, h), k_(k) {
  if (k < 1) throw std::invalid_argument("ekahan_polarized: k must be at least 1");
  const auto& u = system_->potential();
  if (!u.is_zero() && (!u.homogeneous() || u.degree() != k + 2)) {
    std::ostringstream os;
    os << "ekahan_polarized: k = " << k << " needs a homogeneous potential of degree " << k + 2
       << ", have degree " << u.degree();
    throw std::invalid_argument(os.str());
  }
  ops_ = ExponentialBlock::compute(*system_, k * h);
}

Vector PolarizedEKahanStep::advance(std::span<const Vector> window, StepStats* stats) const {
  check_window(window);
  const auto& u = system_->potential();
  const Index n = system_->dim();
  const double kh = k_ * h_;
  Vector next = ops_.exp_ta * window[0];
  if (ops_.support.empty() || u.is_zero()) {
    if (stats) *stats = StepStats{1, 0.0};
    return next;
  }

  // gradU_K(window, v) = c + L v on the support block.
  std::vector<Vector> slots(window.begin(), window.end());
  slots.push_back(Vector::Zero(n));
  const Vector constant = gather(polarized_gradient(u, slots), ops_.support);
  const Index r = static_cast<Index>(ops_.support.size());
  Matrix linear(r, r);
  for (Index j = 0; j < r; ++j) {
    slots.back()[ops_.support[static_cast<std::size_t>(j)]] = 1.0;
    linear.col(j) = gather(polarized_gradient(u, slots), ops_.support) - constant;
    slots.back()[ops_.support[static_cast<std::size_t>(j)]] = 0.0;
  }

  Matrix step_matrix = -kh * (ops_.phi_q_rows * linear);
  step_matrix.diagonal().array() += 1.0;
  const Vector rhs = gather(next, ops_.support) + kh * (ops_.phi_q_rows * constant);
  Vector z;
  try {
    z = LuSolver(step_matrix).solve(rhs);
  } catch (const SingularMatrixError& e) {
    fail_singular(scheme_, e);
  }
  next += kh * (ops_.phi_q_support * (constant + linear * z));
  if (stats) *stats = StepStats{1, sup_norm(step_matrix * z - rhs)};
  return next;
}

// ---------------------------------------------------------------------------

std::unique_ptr<IntegratorStep> make_step(SystemPtr system, Scheme scheme, double h,
                                          const StepOptions& options) {
  switch (scheme) {
    case Scheme::ekahan: return std::make_unique<EKahanStep>(std::move(system), h);
    case Scheme::kahan: return std::make_unique<KahanStep>(std::move(system), h);
    case Scheme::eavf: return std::make_unique<EavfStep>(std::move(system), h, options.solver);
    case Scheme::exp_euler: return std::make_unique<ExpEulerStep>(std::move(system), h);
    case Scheme::crk6: return std::make_unique<Crk6Step>(std::move(system), h, options.solver);
    case Scheme::ekahan_polarized: {
      int k = options.polarization_k;
      if (k == 0) k = std::max(1, system->potential().degree() - 2);
      return std::make_unique<PolarizedEKahanStep>(std::move(system), h, k);
    }
  }
  throw std::invalid_argument("make_step: unknown scheme");
}

std::size_t step_count(double h, double t_final) {
  if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("step size must be positive");
  if (!(t_final >= 0.0) || !std::isfinite(t_final)) throw std::invalid_argument("final time must be >= 0");
  const double ratio = t_final / h;
  const double n = std::round(ratio);
  if (std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) {
    std::ostringstream os;
    os << "final time " << t_final << " is not a multiple of h = " << h;
    throw std::invalid_argument(os.str());
  }
  return static_cast<std::size_t>(n);
}

Trajectory integrate(const IntegratorStep& step, const Vector& x0, double t_final, double t0,
                     const StarterOptions& starter) {
  const double h = step.step_size();
  const std::size_t steps = step_count(h, t_final);
  if (x0.size() != step.system().dim()) throw std::invalid_argument("integrate: dimension mismatch");

  Trajectory traj;
  traj.h = h;
  traj.states.reserve(steps + 1);
  traj.times.reserve(steps + 1);
  traj.stats.reserve(steps + 1);
  traj.states.push_back(x0);
  traj.times.push_back(t0);
  traj.stats.push_back({});

  const auto k = static_cast<std::size_t>(step.window());
  std::optional<Crk6Step> starter_step;
  if (k > 1) starter_step.emplace(step.system_ptr(), h / starter.substeps, starter.solver);

  for (std::size_t n = 1; n <= steps; ++n) {
    StepStats stats;
    try {
      if (n < k) {
        Vector y = traj.states.back();
        for (int s = 0; s < starter.substeps; ++s) {
          StepStats sub;
          y = starter_step->step(y, &sub);
          stats.iterations += sub.iterations;
          stats.residual = std::max(stats.residual, sub.residual);
        }
        traj.states.push_back(std::move(y));
      } else {
        const std::span<const Vector> window(traj.states.data() + (n - k), k);
        traj.states.push_back(step.advance(window, &stats));
      }
    } catch (const StepFailure& e) {
      traj.failure = IntegrationFailure{n, e.what(), e.residual()};
      break;
    }
    if (!traj.states.back().allFinite()) {
      traj.states.pop_back();
      traj.failure = IntegrationFailure{n, "non-finite state", std::numeric_limits<double>::infinity()};
      break;
    }
    traj.times.push_back(t0 + static_cast<double>(n) * h);
    traj.stats.push_back(stats);
  }
  return traj;
}

Trajectory reference_solution(SystemPtr system, const Vector& x0, double h, std::size_t steps,
                              int substeps, const SolverSettings& settings) {
  if (substeps < 1) throw std::invalid_argument("reference_solution: substeps must be >= 1");
  const Crk6Step crk(std::move(system), h / substeps, settings);
  Trajectory traj;
  traj.h = h;
  traj.states.reserve(steps + 1);
  traj.states.push_back(x0);
  traj.times.push_back(0.0);
  traj.stats.push_back({});
  Vector y = x0;
  for (std::size_t n = 1; n <= steps; ++n) {
    StepStats stats;
    try {
      for (int s = 0; s < substeps; ++s) {
        StepStats sub;
        y = crk.step(y, &sub);
        stats.iterations += sub.iterations;
        stats.residual = std::max(stats.residual, sub.residual);
      }
    } catch (const StepFailure& e) {
      traj.failure = IntegrationFailure{n, e.what(), e.residual()};
      break;
    }
    traj.states.push_back(y);
    traj.times.push_back(static_cast<double>(n) * h);
    traj.stats.push_back(stats);
  }
  return traj;
}

}  // namespace ekahan
