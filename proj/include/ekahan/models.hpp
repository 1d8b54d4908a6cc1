#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ekahan/system.hpp"

namespace ekahan {

enum class ModelId { henon_heiles, fpu, zk };

std::string_view model_name(ModelId id);
std::optional<ModelId> parse_model(std::string_view name);

/// A ready-to-integrate system together with its initial state.
struct Model {
  std::string name;
  SystemPtr system;
  Vector x0;
};

struct FpuParams {
  int p = 1;
  double beta = 0.0;
  double gamma = 0.0;
  double m = 0.0;
  /// Defaults to 3/4 for p = 1 and 100 for p = 2.
  std::optional<double> epsilon;
  double length = 128.0;
  double dx = 1.0;
  double alpha = 0.1;

  double resolved_epsilon() const;
  /// Number of grid intervals L / dx.
  Index intervals() const;
  /// Kink centres in grid-index units, (32, 96) whatever the lattice size.
  std::vector<double> kink_centres() const;
};

struct ZkParams {
  double length = 6.0;
  Index points = 33;  // grid points per direction, endpoint included
  int p = 1;

  Index cells() const { return points - 1; }
  double dx() const { return length / static_cast<double>(points - 1); }
};

/// Model identity plus every parameter that any model reads.
struct ModelConfig {
  ModelId id = ModelId::henon_heiles;
  FpuParams fpu;
  ZkParams zk;
};

/// Throws std::invalid_argument with a readable message when a parameter is
/// out of range.
void validate(const FpuParams& params);
void validate(const ZkParams& params);

Model henon_heiles();
Model fpu(const FpuParams& params = {});
Model zk(const ZkParams& params = {});
Model build_model(const ModelConfig& config);

// Difference operators.

/// Dirichlet second difference on n interior nodes: (u_{j-1} - 2u_j + u_{j+1}) / dx^2.
Matrix dirichlet_second_difference(Index n, double dx);
/// Periodic central first difference (u_{j+1} - u_{j-1}) / (2 dx); skew.
Matrix periodic_first_difference(Index n, double dx);
/// Periodic second difference (u_{j-1} - 2u_j + u_{j+1}) / dx^2.
Matrix periodic_second_difference(Index n, double dx);

// FPU kink initial data.

/// q_j(t) = 5 sum_k ln((1 + e^{2(alpha(j-k) + t sinh alpha)}) / (1 + e^{2(alpha(j-k-1) + t sinh alpha)}))
double fpu_kink_displacement(double j, double t, double alpha, const std::vector<double>& centres);
/// d/dt q_j at t = 0.
double fpu_kink_velocity(double j, double alpha, const std::vector<double>& centres);

/// u(0, x, y) for the two-dimensional wave problem on [0, L]^2.
double zk_initial_profile(double x, double y, double length);

}  // namespace ekahan
