#pragma once

// Large-deviations workbench: variational upper bounds on the rate function
// by entropy minimization over step controls, plain and Girsanov-tilted
// Monte Carlo estimates of small-noise event probabilities, and the
// -eps log p versus rate comparison.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jumpns/skeleton.hpp"

namespace jumpns {

enum class EventKind { terminal_energy_above, sup_v_norm_above, terminal_distance_below };

std::string to_string(EventKind kind);
EventKind event_kind_from_string(const std::string& s);

/// Event on path space with a continuous score:
///   terminal_energy_above   score = |u(T)|_H^2,       event: score >= threshold
///   sup_v_norm_above        score = sup_t |u(t)|_V,   event: score >= threshold
///   terminal_distance_below score = |u(T) - ref|_H,   event: score <= threshold
struct EventFunctional {
  EventKind kind = EventKind::terminal_energy_above;
  double threshold = 0.0;
  std::optional<VelocityField> reference;

  double score(const Trajectory& traj) const;
  bool contains(const Trajectory& traj) const;
  /// Distance of the score to the event's level set, 0 inside the event.
  double residual(const Trajectory& traj) const;
};

// Derivative-free search ---------------------------------------------------

struct NelderMeadOptions {
  int max_evals = 2000;
  double initial_step = 0.25;
  double ftol = 1e-10;
  double xtol = 1e-8;
};

struct NelderMeadResult {
  std::vector<double> x;
  double fx = 0.0;
  int evals = 0;
  bool converged = false;
};

/// Nelder-Mead simplex minimization with an axis-aligned initial simplex.
NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                             std::vector<double> x0, const NelderMeadOptions& opts);

// Rate minimization -------------------------------------------------------

/// Step-control search space: uniform time intervals times all marks, with
/// decision variables log g clamped to [-log bound_n, log bound_n].
struct RateParameterization {
  std::size_t intervals = 4;
  int bound_n = 8;

  std::size_t dimension(std::size_t marks) const { return intervals * marks; }
  ControlField decode(std::span<const double> log_g, double horizon, std::size_t marks) const;
};

struct OptimizerConfig {
  NelderMeadOptions simplex;
  int restarts = 2;
  double restart_spread = 0.3;
  double penalty_start = 10.0;
  double penalty_factor = 10.0;
  int penalty_levels = 8;
  /// Penalty runs aim 0.1 * residual_tol inside the event; an estimate is
  /// reported feasible only when its skeleton lies in the event (residual 0).
  double residual_tol = 1e-4;
};

struct OptimizerTraceEntry {
  double penalty = 0.0;
  int evals = 0;
  double objective = 0.0;
  double rate = 0.0;
  double residual = 0.0;
};

struct RateEstimate {
  ControlField control;
  double rate_value = 0.0;
  double constraint_residual = 0.0;
  bool feasible = false;
  std::vector<OptimizerTraceEntry> optimizer_trace;
  std::string message;
};

/// Minimizes L_T(g) subject to event(u^g) over the parameterization by an
/// escalating quadratic penalty, then restores exact feasibility by scaling
/// log g radially. The result is an upper bound on inf{L_T(g) : u^g in event}.
RateEstimate minimize_rate(const EventFunctional& event, const SkeletonProblem& problem,
                           const RateParameterization& parameterization, const OptimizerConfig& config,
                           std::uint64_t seed, const ControlField* warm_start = nullptr);

// Monte Carlo --------------------------------------------------------------

struct ProbabilityEstimate {
  double p_hat = 0.0;
  /// 95% interval: Wilson for plain sampling, normal for weighted sampling.
  double lower = 0.0;
  double upper = 1.0;
  double std_error = 0.0;
  std::size_t hits = 0;
  std::size_t samples = 0;
  /// (sum w 1_A)^2 / sum (w 1_A)^2; equals hits for unit weights.
  double effective_sample_size = 0.0;
  bool weighted = false;
};

/// Wilson score interval at 95%.
std::pair<double, double> wilson_interval(std::size_t hits, std::size_t n);

/// Plain Monte Carlo with the unit control. Sample i uses stream_seed(seed, i).
ProbabilityEstimate mc_probability(const EventFunctional& event, double eps, std::size_t n_samples,
                                   std::uint64_t seed, const SkeletonProblem& problem);

/// E_Q[1_A M^eps_T] under the tilt. Sample i uses stream_seed(seed, i).
ProbabilityEstimate importance_sampled_probability(const EventFunctional& event, double eps,
                                                   const ControlField& tilt, std::size_t n_samples,
                                                   std::uint64_t seed, const SkeletonProblem& problem,
                                                   std::vector<double>* weights_out = nullptr);

struct ScalingRow {
  double eps = 0.0;
  std::optional<ProbabilityEstimate> plain;
  std::optional<ProbabilityEstimate> tilted;
  double p_hat = 0.0;
  std::size_t hits = 0;
  double neg_eps_log_p = 0.0;
  double rate_value = 0.0;
  bool insufficient_hits = true;
};

struct ScalingBudget {
  std::size_t plain = 0;
  std::size_t tilted = 0;
};

struct ScalingOptions {
  std::size_t min_hits = 30;
  double band = 0.25;
  std::uint64_t seed = 0;
};

struct ScalingTable {
  std::vector<ScalingRow> rows;
  /// Index of the smallest eps with at least min_hits hits.
  std::optional<std::size_t> checked_row;
  double relative_gap = 0.0;
  bool within_band = false;
  /// Plain and tilted 95% intervals overlap on every row where both exist
  /// and the plain run reached min_hits.
  bool estimators_agree = true;
  bool monotone = true;
};

/// Rows in the order of eps_grid (decreasing). Uses the tilted estimate as
/// p_hat whenever a tilted budget is given, else the plain one.
ScalingTable ldp_scaling_table(const EventFunctional& event, const std::vector<double>& eps_grid,
                               const std::vector<ScalingBudget>& budgets, const RateEstimate& rate,
                               const SkeletonProblem& problem, const ScalingOptions& options);

struct EnsembleStats {
  double mean = 0.0;
  double std_dev = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
  std::size_t guard_hits = 0;
};

/// Mean of sup|X|_H^2 + int |X|_V^2 over an ensemble at noise level eps,
/// under `control` (unit when null).
EnsembleStats ensemble_upsilon(const SkeletonProblem& problem, double eps, std::size_t n_samples,
                               std::uint64_t seed, const ControlField* control = nullptr);

}  // namespace jumpns
