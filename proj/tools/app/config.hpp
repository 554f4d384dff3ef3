#pragma once

// Run configuration. The on-disk format is INI-style text:
//
//   [grid]     n_modes, domain_length
//   [noise]    marks, weights, sigma, base_field, linear_gain
//   [solver]   dt, T, eps, viscosity, cutoff_m, guard, initial, forcing,
//              scheme, compensation, nonlinear
//   [experiment]  command-specific keys (listed in the README)
//   [output]   directory, snapshot_stride
//
// Each value is read as JSON when it parses, else as a bare string, so
// `weights = [1.0, 0.5]` and `scheme = exponential` both work. A file whose
// first non-blank character is '{' is read as JSON with the same sections.
// Unknown sections and keys are rejected.

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jumpns/ldp.hpp"

namespace jumpns::app {

using Json = nlohmann::ordered_json;

Json parse_ini_text(const std::string& text);
/// Reads either encoding; throws ConfigError on syntax errors.
Json read_config_file(const std::filesystem::path& path);

struct GridSection {
  int n_modes = 16;
  double domain_length = 2.0 * std::numbers::pi;
};

struct NoiseSection {
  std::vector<std::string> marks;
  std::vector<double> weights{1.0};
  std::vector<double> sigma{0.0};
  Json base_field = Json{{"kind", "zero"}};
  double linear_gain = 0.0;
};

struct SolverSection {
  double dt = 1e-3;
  double T = 1.0;
  double eps = 1.0;
  double viscosity = 1.0;
  std::optional<double> cutoff_m;
  std::optional<double> guard;
  Json initial = Json{{"kind", "zero"}};
  Json forcing = Json{{"kind", "zero"}};
  StokesScheme scheme = StokesScheme::exponential;
  CompensationForm compensation = CompensationForm::base_rate;
  bool nonlinear = true;
};

struct ExperimentSection {
  std::uint64_t seed = 1;
  std::size_t n_traj = 1;
  Json control;       // control spec, null = unit
  Json probe;         // {"direction": control spec of h, "n": [...]}
  Json event;         // event spec
  Json planted;       // optional control spec whose L_T is reported next to the rate
  RateParameterization parameterization;
  OptimizerConfig optimizer;
  std::vector<double> eps_grid;
  std::vector<ScalingBudget> budgets;
  std::size_t min_hits = 30;
  double band = 0.25;
  std::size_t n_samples = 1000;
  Json tilt;          // control spec for importance sampling, null = none
  std::string suite = "all";
  double tolerance_scale = 1.0;
  std::string benchmark_dir;
};

struct OutputSection {
  std::string directory;
  std::size_t snapshot_stride = 0;
};

struct RunConfig {
  GridSection grid;
  NoiseSection noise;
  SolverSection solver;
  ExperimentSection experiment;
  OutputSection output;
  /// Directory relative paths in the config resolve against.
  std::filesystem::path base_dir;

  /// Normalized JSON with every default filled in; parse_run_config of the
  /// echo yields an equal echo.
  Json echo() const;
};

/// Validates and fills defaults. Errors name the offending field.
RunConfig parse_run_config(const Json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

// Builders -----------------------------------------------------------------

SpectralGrid build_grid(const RunConfig& c);
/// Field spec: {"kind": "zero" | "mode" | "random" | "file", ...}.
VelocityField build_field(const Json& spec, const SpectralGrid& grid, const std::filesystem::path& base_dir,
                          const std::string& where);
/// Control spec: path string, inline control JSON, {"kind": "unit"},
/// {"kind": "constant", "value"} or {"kind": "uniform", "intervals", "values"}.
ControlField build_control(const Json& spec, double horizon, std::size_t marks,
                           const std::filesystem::path& base_dir, const std::string& where);
MarkSpace build_marks(const RunConfig& c);
NoiseCoefficient build_noise(const RunConfig& c, const SpectralGrid& grid);
SolverParams build_params(const RunConfig& c, const SpectralGrid& grid);
/// Problem template with the experiment control (unit when absent).
SkeletonProblem build_problem(const RunConfig& c);
/// Event spec: {"kind", "threshold"} plus, for terminal_distance_below,
/// "reference" (field spec or {"kind": "skeleton_terminal", "control": spec},
/// the control defaulting to experiment.planted)
/// and optionally "threshold_fraction" (threshold = fraction * |ref - u^1(T)|_H).
EventFunctional build_event(const RunConfig& c, const SkeletonProblem& problem);

std::string to_string(StokesScheme s);
std::string to_string(CompensationForm f);

}  // namespace jumpns::app
