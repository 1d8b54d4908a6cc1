#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ekahan/integrators.hpp"
#include "ekahan/models.hpp"

namespace ekahan {

/// Thrown for malformed or out-of-range configuration (CLI exit code 1).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Settings for one `run`. Read from a flat `key = value` file; every key can
/// also be given on the command line.
///
/// Keys: model, schemes, h_list, T, energy_h, output_dir, reference_substeps,
/// timing_repeats, write_trajectories, polarization_k, fpu.{p, beta, gamma, m,
/// epsilon, L, dx, alpha}, zk.{L, N, p}.
struct ExperimentConfig {
  ModelConfig model;
  std::vector<Scheme> schemes;
  std::vector<double> h_list;
  double t_final = 0.0;
  /// Step size of the energy time series; none disables them.
  std::optional<double> energy_h;
  std::filesystem::path output_dir = "ekahan_output";
  int reference_substeps = 8;
  /// Timed repetitions per trajectory (median reported). 0 skips timing and
  /// writes zero wall times, which makes every output byte-reproducible.
  int timing_repeats = 3;
  bool write_trajectories = false;
  int polarization_k = 0;
};

/// The per-model defaults (scheme list, step ladder, horizon).
ExperimentConfig default_config(ModelId model);
ExperimentConfig default_config(const ModelConfig& model);

/// Applies one key/value pair. Setting `model` resets everything else to
/// that model's defaults, so it should come first.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Reads `key = value` lines; `#` starts a comment. The model key, wherever
/// it appears, is applied before the others.
ExperimentConfig parse_config(std::istream& in, const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// Checks cross-field consistency (non-empty ladders, scheme/model
/// compatibility). Throws ConfigError.
void validate(const ExperimentConfig& config);

/// Shortest round-trip decimal form of h, used in file names.
std::string format_step(double h);
/// 17 significant digits; "nan"/"inf" for non-finite values.
std::string format_value(double v);

struct RunRow {
  Scheme scheme;
  double h = 0.0;
  double global_error = 0.0;
  double wall_seconds = 0.0;
  double precompute_seconds = 0.0;
  std::optional<IntegrationFailure> failure;
};

struct RunResult {
  std::vector<RunRow> rows;
  std::vector<std::filesystem::path> files;
  std::vector<std::string> failures;

  bool ok() const { return failures.empty(); }
};

/// Runs the experiment, writing
///   order_<model>.csv           scheme, h, E_G, wall_seconds
///   precompute_<model>.csv      scheme, h, precompute_seconds
///   energy_<model>_<scheme>_h<h>.csv  t, H, E_H, deviation_actual, deviation_predicted, residual
///   trajectory_<model>_<scheme>_h<h>.csv  (optional) t, x_0, ..., x_{n-1}
/// Integration failures are recorded and reported, not thrown.
RunResult run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

struct CheckResult {
  std::string name;
  bool passed = false;
  /// A negative control: the check is meant to fail and does not count
  /// against the suite.
  bool expected_fail = false;
  double max_residual = 0.0;
  double tolerance = 0.0;
  std::string detail;

  bool ok() const { return passed != expected_fail; }
};

struct VerificationReport {
  std::vector<CheckResult> checks;
  bool ok() const;
  std::string to_json() const;
};

/// Property checks across the library on small, fast instances.
VerificationReport run_verification_suite(std::ostream* log = nullptr);

}  // namespace ekahan
