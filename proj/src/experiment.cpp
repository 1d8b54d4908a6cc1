#include "ekahan/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ekahan/diagnostics.hpp"
#include "ekahan/polynomial.hpp"

namespace ekahan {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw ConfigError("invalid number for " + key + ": '" + text + "'");
  return v;
}

long long parse_int(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError("invalid integer for " + key + ": '" + text + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + text + "'");
}

bool is_model_parameter(const std::string& key) {
  return key.rfind("fpu.", 0) == 0 || key.rfind("zk.", 0) == 0;
}

void apply_model_parameter(ModelConfig& model, const std::string& key, const std::string& value) {
  if (key == "fpu.p") model.fpu.p = static_cast<int>(parse_int(key, value));
  else if (key == "fpu.beta") model.fpu.beta = parse_double(key, value);
  else if (key == "fpu.gamma") model.fpu.gamma = parse_double(key, value);
  else if (key == "fpu.m") model.fpu.m = parse_double(key, value);
  else if (key == "fpu.epsilon") model.fpu.epsilon = parse_double(key, value);
  else if (key == "fpu.L") model.fpu.length = parse_double(key, value);
  else if (key == "fpu.dx") model.fpu.dx = parse_double(key, value);
  else if (key == "fpu.alpha") model.fpu.alpha = parse_double(key, value);
  else if (key == "zk.L") model.zk.length = parse_double(key, value);
  else if (key == "zk.N") model.zk.points = static_cast<Index>(parse_int(key, value));
  else if (key == "zk.p") model.zk.p = static_cast<int>(parse_int(key, value));
  else throw ConfigError("unknown configuration key '" + key + "'");
}

std::vector<double> ladder(double h0, int first, int last) {
  std::vector<double> out;
  for (int i = first; i <= last; ++i) out.push_back(std::ldexp(h0, -i));
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

ExperimentConfig default_config(const ModelConfig& model) {
  ExperimentConfig c;
  c.model = model;
  switch (model.id) {
    case ModelId::henon_heiles:
      c.schemes = {Scheme::ekahan, Scheme::kahan, Scheme::eavf, Scheme::exp_euler};
      c.h_list = ladder(0.02, 0, 4);
      c.t_final = 100.0;
      c.energy_h = 0.02;
      break;
    case ModelId::fpu:
      if (model.fpu.p == 2)
        c.schemes = {Scheme::ekahan_polarized, Scheme::eavf, Scheme::exp_euler};
      else
        c.schemes = {Scheme::ekahan, Scheme::kahan, Scheme::eavf, Scheme::exp_euler};
      c.h_list = ladder(1.0, 1, 4);
      c.t_final = 100.0;
      c.energy_h = 0.25;
      break;
    case ModelId::zk:
      c.schemes = {Scheme::ekahan, Scheme::kahan, Scheme::exp_euler};
      c.h_list = ladder(0.01, 2, 5);
      c.t_final = 1.0;
      c.energy_h = 0.0025;
      break;
  }
  return c;
}

ExperimentConfig default_config(ModelId model) {
  ModelConfig m;
  m.id = model;
  return default_config(m);
}

void apply_setting(ExperimentConfig& c, const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string value = trim(raw_value);
  if (key == "model") {
    const auto id = parse_model(value);
    if (!id) throw ConfigError("unknown model '" + value + "' (expected henon_heiles, fpu or zk)");
    ModelConfig m = c.model;
    m.id = *id;
    c = default_config(m);
  } else if (is_model_parameter(key)) {
    apply_model_parameter(c.model, key, value);
  } else if (key == "schemes" || key == "scheme") {
    c.schemes.clear();
    for (const auto& name : split_list(value)) {
      const auto s = parse_scheme(name);
      if (!s) throw ConfigError("unknown scheme '" + name + "'");
      c.schemes.push_back(*s);
    }
  } else if (key == "h_list") {
    c.h_list.clear();
    for (const auto& item : split_list(value)) c.h_list.push_back(parse_double(key, item));
  } else if (key == "T") {
    c.t_final = parse_double(key, value);
  } else if (key == "energy_h") {
    if (value.empty() || value == "none") c.energy_h.reset();
    else c.energy_h = parse_double(key, value);
  } else if (key == "output_dir") {
    c.output_dir = value;
  } else if (key == "reference_substeps") {
    c.reference_substeps = static_cast<int>(parse_int(key, value));
  } else if (key == "timing_repeats") {
    c.timing_repeats = static_cast<int>(parse_int(key, value));
  } else if (key == "write_trajectories") {
    c.write_trajectories = parse_bool(key, value);
  } else if (key == "polarization_k") {
    c.polarization_k = static_cast<int>(parse_int(key, value));
  } else {
    throw ConfigError("unknown configuration key '" + key + "'");
  }
}

ExperimentConfig parse_config(std::istream& in,
                              const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    entries.emplace_back(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
  }
  entries.insert(entries.end(), overrides.begin(), overrides.end());

  // Model identity and parameters first: they determine the defaults the
  // remaining keys override.
  ModelConfig model;
  for (const auto& [k, v] : entries) {
    if (k == "model") {
      const auto id = parse_model(v);
      if (!id) throw ConfigError("unknown model '" + v + "' (expected henon_heiles, fpu or zk)");
      model.id = *id;
    } else if (is_model_parameter(k)) {
      apply_model_parameter(model, k, v);
    }
  }
  ExperimentConfig c = default_config(model);
  for (const auto& [k, v] : entries)
    if (k != "model" && !is_model_parameter(k)) apply_setting(c, k, v);
  validate(c);
  return c;
}

void validate(const ExperimentConfig& c) {
  try {
    if (c.model.id == ModelId::fpu) validate(c.model.fpu);
    if (c.model.id == ModelId::zk) validate(c.model.zk);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.schemes.empty()) throw ConfigError("schemes: at least one scheme is required");
  if (c.h_list.empty()) throw ConfigError("h_list: at least one step size is required");
  if (!(c.t_final >= 0.0)) throw ConfigError("T must be >= 0");
  if (c.reference_substeps < 1) throw ConfigError("reference_substeps must be >= 1");
  if (c.timing_repeats < 0) throw ConfigError("timing_repeats must be >= 0");
  if (c.polarization_k < 0) throw ConfigError("polarization_k must be >= 0");
  std::vector<double> all = c.h_list;
  if (c.energy_h) all.push_back(*c.energy_h);
  for (double h : all) {
    if (!(h > 0.0)) throw ConfigError("step sizes must be positive");
    try {
      (void)step_count(h, c.t_final);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  const int degree = c.model.id == ModelId::fpu ? c.model.fpu.p + 2 : 3;
  for (Scheme s : c.schemes) {
    if ((s == Scheme::ekahan || s == Scheme::kahan) && degree > 3)
      throw ConfigError(std::string(scheme_name(s)) + " needs a cubic potential; use ekahan_polarized");
    if (s == Scheme::ekahan_polarized) {
      const int k = c.polarization_k == 0 ? degree - 2 : c.polarization_k;
      if (k != degree - 2)
        throw ConfigError("polarization_k must equal the potential degree minus 2 (" +
                          std::to_string(degree - 2) + ")");
    }
  }
}

// ---------------------------------------------------------------------------
// Formatting

std::string format_step(double h) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, h);
  return std::string(buf, ec == std::errc() ? ptr : buf);
}

std::string format_value(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, ec == std::errc() ? ptr : buf);
}

// ---------------------------------------------------------------------------
// Experiment driver

namespace {

class ReferenceCache {
 public:
  ReferenceCache(SystemPtr system, Vector x0, double t_final, int substeps)
      : system_(std::move(system)), x0_(std::move(x0)), t_final_(t_final), substeps_(substeps) {}

  // A reference whose grid contains every multiple of h.
  const Trajectory& for_step(double h) {
    for (const auto& [hr, traj] : cache_) {
      const double ratio = h / hr;
      if (std::abs(ratio - std::round(ratio)) <= 1e-9 * ratio && std::round(ratio) >= 1.0) return traj;
    }
    auto traj = reference_solution(system_, x0_, h, step_count(h, t_final_), substeps_);
    if (traj.failure) throw std::runtime_error("reference solver failed: " + traj.failure->message);
    return cache_.emplace(h, std::move(traj)).first->second;
  }

  void prepare(std::vector<double> steps) {
    std::sort(steps.begin(), steps.end());
    for (double h : steps) (void)for_step(h);
  }

 private:
  SystemPtr system_;
  Vector x0_;
  double t_final_;
  int substeps_;
  std::map<double, Trajectory> cache_;
};

void write_energy_csv(const std::filesystem::path& path, const EnergyReport& r) {
  auto out = open_output(path);
  out << "t,H,E_H,deviation_actual,deviation_predicted,residual\n";
  for (std::size_t n = 0; n < r.times.size(); ++n) {
    out << format_value(r.times[n]) << ',' << format_value(r.energies[n]) << ','
        << format_value(r.energy_error[n]) << ',' << format_value(r.deviation_actual[n]) << ','
        << format_value(r.deviation_predicted[n]) << ',' << format_value(r.residual[n]) << '\n';
  }
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  auto out = open_output(path);
  out << 't';
  const Index dim = traj.states.empty() ? 0 : traj.states.front().size();
  for (Index i = 0; i < dim; ++i) out << ",x_" << i;
  out << '\n';
  for (std::size_t n = 0; n < traj.size(); ++n) {
    out << format_value(traj.times[n]);
    for (Index i = 0; i < dim; ++i) out << ',' << format_value(traj.states[n][i]);
    out << '\n';
  }
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, std::ostream* log) {
  validate(config);
  const Model model = [&] {
    try {
      return build_model(config.model);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }();
  std::filesystem::create_directories(config.output_dir);
  const std::string tag(model_name(config.model.id));

  StepOptions options;
  options.polarization_k = config.polarization_k;

  ReferenceCache references(model.system, model.x0, config.t_final, config.reference_substeps);
  references.prepare(config.h_list);

  RunResult result;
  std::map<std::pair<int, double>, Trajectory> kept;
  for (Scheme scheme : config.schemes) {
    for (double h : config.h_list) {
      RunRow row;
      row.scheme = scheme;
      row.h = h;
      const auto t0 = std::chrono::steady_clock::now();
      const auto step = make_step(model.system, scheme, h, options);
      row.precompute_seconds = config.timing_repeats > 0 ? seconds_since(t0) : 0.0;

      Trajectory traj;
      std::vector<double> times;
      const int runs = std::max(1, config.timing_repeats);
      for (int rep = 0; rep < runs; ++rep) {
        const auto start = std::chrono::steady_clock::now();
        traj = integrate(*step, model.x0, config.t_final);
        times.push_back(seconds_since(start));
      }
      row.wall_seconds = config.timing_repeats > 0 ? median(times) : 0.0;
      if (traj.failure) {
        row.failure = traj.failure;
        row.global_error = std::numeric_limits<double>::quiet_NaN();
        std::ostringstream os;
        os << scheme_name(scheme) << " h=" << format_step(h) << ": step " << traj.failure->step_index << ": "
           << traj.failure->message;
        result.failures.push_back(os.str());
      } else {
        row.global_error = global_error(traj, references.for_step(h));
      }
      if (log)
        *log << scheme_name(scheme) << " h=" << format_step(h) << " E_G=" << format_value(row.global_error)
             << " wall=" << row.wall_seconds << "s\n";
      result.rows.push_back(row);
      if (config.energy_h && h == *config.energy_h) kept.emplace(std::pair{static_cast<int>(scheme), h}, traj);
      if (config.write_trajectories) {
        const auto path = config.output_dir /
                          ("trajectory_" + tag + "_" + std::string(scheme_name(scheme)) + "_h" + format_step(h) + ".csv");
        write_trajectory_csv(path, traj);
        result.files.push_back(path);
      }
    }
  }

  {
    const auto path = config.output_dir / ("order_" + tag + ".csv");
    auto out = open_output(path);
    out << "scheme,h,E_G,wall_seconds\n";
    for (const auto& r : result.rows)
      out << scheme_name(r.scheme) << ',' << format_value(r.h) << ',' << format_value(r.global_error) << ','
          << format_value(r.wall_seconds) << '\n';
    result.files.push_back(path);
  }
  {
    const auto path = config.output_dir / ("precompute_" + tag + ".csv");
    auto out = open_output(path);
    out << "scheme,h,precompute_seconds\n";
    for (const auto& r : result.rows)
      out << scheme_name(r.scheme) << ',' << format_value(r.h) << ',' << format_value(r.precompute_seconds) << '\n';
    result.files.push_back(path);
  }

  if (config.energy_h) {
    const double h = *config.energy_h;
    for (Scheme scheme : config.schemes) {
      const auto step = make_step(model.system, scheme, h, options);
      auto it = kept.find({static_cast<int>(scheme), h});
      const Trajectory traj = it != kept.end() ? it->second : integrate(*step, model.x0, config.t_final);
      if (traj.failure && it == kept.end()) {
        std::ostringstream os;
        os << scheme_name(scheme) << " h=" << format_step(h) << " (energy run): step " << traj.failure->step_index
           << ": " << traj.failure->message;
        result.failures.push_back(os.str());
      }
      const Trajectory* ref = model.system->conservative() ? nullptr : &references.for_step(h);
      const auto report = energy_report(*model.system, scheme, step->window(), traj, ref);
      const auto path = config.output_dir /
                        ("energy_" + tag + "_" + std::string(scheme_name(scheme)) + "_h" + format_step(h) + ".csv");
      write_energy_csv(path, report);
      result.files.push_back(path);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Verification suite

bool VerificationReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.ok(); });
}

std::string VerificationReport::to_json() const {
  nlohmann::json j;
  j["passed"] = ok();
  j["checks"] = nlohmann::json::array();
  for (const auto& c : checks) {
    j["checks"].push_back({{"name", c.name},
                           {"passed", c.passed},
                           {"expected_fail", c.expected_fail},
                           {"ok", c.ok()},
                           {"max_residual", c.max_residual},
                           {"tolerance", c.tolerance},
                           {"detail", c.detail}});
  }
  return j.dump(2);
}

namespace {

SystemPtr random_cubic_system(std::mt19937_64& rng, Index dim) {
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::uniform_int_distribution<Index> var(0, dim - 1);
  Matrix b(dim, dim), c(dim, dim);
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j) {
      b(i, j) = coef(rng);
      c(i, j) = coef(rng);
    }
  Matrix q = b - b.transpose();
  Matrix m = 0.5 * (c + c.transpose());
  std::vector<Monomial> terms;
  for (int t = 0; t < 3 * static_cast<int>(dim); ++t) {
    std::map<Index, int> powers;
    const int degree = t % 3 == 0 ? 2 : 3;
    for (int s = 0; s < degree; ++s) ++powers[var(rng)];
    Monomial mono{coef(rng), {}};
    for (const auto& [v, p] : powers) mono.factors.emplace_back(v, p);
    terms.push_back(std::move(mono));
  }
  return std::make_shared<const SemilinearSystem>(
      std::move(q), std::move(m), PolynomialPotential::from_monomials(dim, std::move(terms)));
}

double round_trip_error(const SystemPtr& sys, Scheme scheme, const Vector& x, double h) {
  const auto forward = make_step(sys, scheme, h);
  const auto backward = make_step(sys, scheme, -h);
  return (backward->step(forward->step(x)) - x).norm();
}

CheckResult make_check(std::string name, double value, double tolerance, std::string detail = {}) {
  CheckResult c;
  c.name = std::move(name);
  c.max_residual = value;
  c.tolerance = tolerance;
  c.passed = std::isfinite(value) && value <= tolerance;
  c.detail = std::move(detail);
  return c;
}

Trajectory run(const SystemPtr& sys, Scheme scheme, double h, const Vector& x0, double t_final, int k = 0) {
  StepOptions opt;
  opt.polarization_k = k;
  const auto step = make_step(sys, scheme, h, opt);
  auto traj = integrate(*step, x0, t_final);
  if (traj.failure) throw std::runtime_error(std::string(scheme_name(scheme)) + ": " + traj.failure->message);
  return traj;
}

}  // namespace

VerificationReport run_verification_suite(std::ostream* log) {
  VerificationReport report;
  auto add = [&](CheckResult c) {
    if (log)
      *log << (c.ok() ? "ok    " : "FAIL  ") << c.name << (c.expected_fail ? " [control]" : "")
           << "  max=" << format_value(c.max_residual) << " tol=" << format_value(c.tolerance)
           << (c.detail.empty() ? "" : "  " + c.detail) << '\n';
    report.checks.push_back(std::move(c));
  };
  auto guarded = [&](const std::string& name, auto&& body) {
    try {
      body();
    } catch (const std::exception& e) {
      CheckResult c;
      c.name = name;
      c.max_residual = std::numeric_limits<double>::quiet_NaN();
      c.detail = std::string("exception: ") + e.what();
      add(std::move(c));
    }
  };

  const Model hh = henon_heiles();
  FpuParams small_fpu;
  small_fpu.length = 32.0;
  const Model fpu1 = fpu(small_fpu);

  guarded("exponential_identity", [&] {
    double worst = 0.0;
    for (const Model* m : {&hh, &fpu1}) {
      const auto block = ExponentialBlock::compute(*m->system, 0.25);
      worst = std::max(worst, block.identity_residual(m->system->linear_operator()));
    }
    add(make_check("exponential_identity", worst, 1e-12));
  });

  guarded("energy_deviation_cubic_henon_heiles", [&] {
    const auto traj = run(hh.system, Scheme::ekahan, 0.02, hh.x0, 100.0);
    const auto r = energy_report(*hh.system, Scheme::ekahan, 1, traj);
    add(make_check("energy_deviation_cubic_henon_heiles", r.max_residual(), 1e-12 * (1.0 + r.max_abs_energy())));
    const bool steady = no_energy_drift(r.energy_error);
    auto bounded = make_check("bounded_energy_error_henon_heiles_ekahan", r.max_energy_error(), 1e-6,
                              steady ? "no drift" : "drift detected");
    bounded.passed = bounded.passed && steady;
    add(std::move(bounded));
  });

  for (Scheme scheme : {Scheme::ekahan, Scheme::eavf, Scheme::exp_euler}) {
    for (const auto& [model, t_final] : {std::pair{&hh, 100.0}, std::pair{&fpu1, 10.0}}) {
      const std::string name =
          "quadratic_identity_" + std::string(scheme_name(scheme)) + "_" + model->name;
      guarded(name, [&] {
        const double h = model == &hh ? 0.02 : 0.25;
        const auto traj = run(model->system, scheme, h, model->x0, t_final);
        const auto r = energy_report(*model->system, scheme, 1, traj);
        if (scheme != Scheme::exp_euler) {
          add(make_check(name, r.max_quadratic_residual(), 1e-11 * (1.0 + r.max_abs_energy())));
          return;
        }
        // Exponential Euler satisfies the identity trivially with its own
        // one-point gradient grad U(x_n), which is not a discrete gradient.
        // The control pairs its steps with the averaged discrete gradient.
        const auto& u = model->system->potential();
        double worst = 0.0;
        for (std::size_t n = 1; n < traj.size(); ++n) {
          const Vector g = avf_gradient(u, traj.states[n], traj.states[n - 1]);
          worst = std::max(worst, quadratic_identity_residual(*model->system, traj.states[n - 1], traj.states[n], g));
        }
        auto c = make_check(name, worst, 1e-11 * (1.0 + r.max_abs_energy()), "averaged discrete gradient");
        c.expected_fail = true;
        add(std::move(c));
      });
    }
  }

  guarded("eavf_energy_conservation", [&] {
    const SolverSettings settings;
    double worst = 0.0;
    for (const auto& [model, h, t_final] : {std::tuple{&hh, 0.02, 100.0}, std::tuple{&fpu1, 0.25, 10.0}}) {
      const auto traj = run(model->system, Scheme::eavf, h, model->x0, t_final);
      const double drift = std::abs(model->system->energy(traj.states.back()) - model->system->energy(model->x0));
      worst = std::max(worst, drift / (static_cast<double>(traj.size() - 1) * 100.0 * settings.tolerance));
    }
    add(make_check("eavf_energy_conservation", worst, 1.0, "|H_N - H_0| / (N * 100 * tol)"));
  });

  guarded("symmetry", [&] {
    std::mt19937_64 rng(20240611);
    for (Scheme scheme : {Scheme::ekahan, Scheme::kahan, Scheme::eavf, Scheme::crk6, Scheme::exp_euler}) {
      double worst = 0.0;
      std::mt19937_64 local = rng;
      std::uniform_real_distribution<double> coord(-0.5, 0.5);
      for (int trial = 0; trial < 10; ++trial) {
        const Index dim = 2 + trial % 7;
        const auto sys = random_cubic_system(local, dim);
        Vector x(dim);
        for (Index i = 0; i < dim; ++i) x[i] = coord(local);
        worst = std::max(worst, round_trip_error(sys, scheme, x, 0.1) / x.norm());
      }
      worst = std::max(worst, round_trip_error(hh.system, scheme, hh.x0, 0.1) / hh.x0.norm());
      auto c = make_check("symmetry_" + std::string(scheme_name(scheme)), worst, 1e-10, "relative round-trip error");
      c.expected_fail = scheme == Scheme::exp_euler;
      add(std::move(c));
    }
  });

  guarded("polarized_k1_matches_ekahan", [&] {
    const auto a = run(hh.system, Scheme::ekahan, 0.02, hh.x0, 10.0);
    const auto b = run(hh.system, Scheme::ekahan_polarized, 0.02, hh.x0, 10.0, 1);
    double worst = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n)
      worst = std::max(worst, (a.states[n] - b.states[n]).lpNorm<Eigen::Infinity>());
    add(make_check("polarized_k1_matches_ekahan", worst, 1e-12));
  });

  guarded("energy_deviation_quartic_fpu", [&] {
    FpuParams p2 = small_fpu;
    p2.p = 2;
    const Model m = fpu(p2);
    const auto traj = run(m.system, Scheme::ekahan_polarized, 0.25, m.x0, 20.0);
    const auto r = energy_report(*m.system, Scheme::ekahan_polarized, 2, traj);
    add(make_check("energy_deviation_quartic_fpu", r.max_residual(), 1e-10 * (1.0 + r.max_abs_energy())));
    add(make_check("multistep_quadratic_identity_fpu", r.max_quadratic_residual(),
                   1e-10 * (1.0 + r.max_abs_energy())));
  });

  for (const auto& [label, beta, gamma] : {std::tuple{"gamma", 0.0, 0.1}, std::tuple{"beta", 2.0, 0.0}}) {
    const std::string name = std::string("dissipation_fpu_") + label;
    guarded(name, [&] {
      FpuParams p;
      p.beta = beta;
      p.gamma = gamma;
      const Model m = fpu(p);
      const auto traj = run(m.system, Scheme::ekahan, 0.25, m.x0, 100.0);
      const double ratio = m.system->energy(traj.states.back()) / m.system->energy(m.x0);
      add(make_check(name, ratio, 0.5, "H(T) / H(0)"));
    });
  }

  guarded("convergence_order_henon_heiles", [&] {
    const double t_final = 10.0;
    const auto ref = reference_solution(hh.system, hh.x0, 0.02 / 16.0, step_count(0.02 / 16.0, t_final), 8);
    for (Scheme scheme : {Scheme::ekahan, Scheme::kahan, Scheme::eavf}) {
      std::vector<std::pair<double, double>> pts;
      for (int i = 0; i <= 4; ++i) {
        const double h = std::ldexp(0.02, -i);
        pts.emplace_back(h, global_error(run(hh.system, scheme, h, hh.x0, t_final), ref));
      }
      const double slope = convergence_slope(pts);
      auto c = make_check("convergence_order_" + std::string(scheme_name(scheme)), std::abs(slope - 2.0), 0.1,
                          "slope " + format_value(slope));
      add(std::move(c));
    }
  });

  guarded("zk_structure", [&] {
    ZkParams p;
    p.points = 9;
    const Model m = zk(p);
    const auto& q = m.system->structure_matrix();
    const auto& mm = m.system->quadratic_matrix();
    const double err = std::max(max_abs(q + q.transpose()), max_abs(mm - mm.transpose()));
    add(make_check("zk_structure", err, 0.0, "skew Q and symmetric M, exact"));
  });

  return report;
}

}  // namespace ekahan
