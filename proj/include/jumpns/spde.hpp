#pragma once

// Time integration of the jump-driven stochastic Navier-Stokes equation
//
//   du + A u dt - B(u) dt = f dt + eps * int_Z G(u(t-), z) (N^{phi/eps}(dz,dt) - eps^-1 nu(dz) dt)
//
// with B(u) = B(u,u) = -Pi[(u.grad)u] as returned by bilinear(). phi = 1
// gives the small-noise equation for u^eps; a step control phi gives the
// tilted (controlled) process X^eps used for importance sampling.
//
// One step of size dt from t_n:
//   1. explicit terms at u_n: theta_m * B(u_n) + f(t_n) + compensator drift,
//      with controls read at the step midpoint
//   2. linear Stokes part: exponential integrating factor (default) or
//      implicit Euler, both diagonal in Fourier space
//   3. every atom with time in (t_n, t_n + dt] adds eps * G(u^-, z), u^- the
//      state after 1-2.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "jumpns/jump_measure.hpp"
#include "jumpns/spectral.hpp"

namespace jumpns {

/// G(u, z_j) = sigma_j * (base + linear_gain * u).
struct NoiseCoefficient {
  std::vector<double> sigma;
  VelocityField base;
  double linear_gain = 0.0;

  std::size_t marks() const { return sigma.size(); }
  bool silent() const;
  /// Lipschitz constant in V: |sigma_j| |c|.
  double lipschitz(std::size_t j) const;
  /// Linear growth constant in V: |sigma_j| max(|base|_V, |c|).
  double growth_v(std::size_t j) const;
  /// Linear growth constant in H: |sigma_j| max(|base|_H, |c|).
  double growth_h(std::size_t j) const;
};

VelocityField g_eval(const NoiseCoefficient& noise, const VelocityField& u, std::size_t mark);

/// Piecewise-constant forcing f(t) = fields[i] on [starts[i], starts[i+1]).
class Forcing {
 public:
  Forcing() = default;
  static Forcing constant(VelocityField f);
  Forcing(std::vector<double> starts, std::vector<VelocityField> fields);

  bool is_zero() const { return fields_.empty(); }
  /// nullptr when the forcing vanishes.
  const VelocityField* at(double t) const;

 private:
  std::vector<double> starts_;
  std::vector<VelocityField> fields_;
};

enum class StokesScheme { exponential, implicit_euler };

/// How the compensator of the tilted measure is written. Both describe the
/// same equation: base_rate subtracts nu dt, tilted_rate subtracts phi nu dt
/// and adds the drift G (phi - 1) nu dt.
enum class CompensationForm { base_rate, tilted_rate };

struct SolverParams {
  double dt = 1e-3;
  double horizon = 1.0;
  double eps = 1.0;
  double viscosity = 1.0;
  /// theta_m threshold m; the nonlinearity is scaled by theta_m(|u|_{Upsilon^H_t}).
  std::optional<double> cutoff_m;
  /// Ceiling on sup|u|_H^2 + int |u|_V^2; exceeding it stops the run with a flag.
  std::optional<double> guard;
  Forcing forcing;
  StokesScheme scheme = StokesScheme::exponential;
  CompensationForm compensation = CompensationForm::base_rate;
  bool nonlinear = true;
  /// Store every k-th state (0 = none, final state always kept).
  std::size_t snapshot_stride = 0;

  /// Number of steps; throws ConfigError unless dt > 0 divides the horizon.
  std::size_t steps() const;
};

/// C^2 cutoff: 1 on [0, m], 0 on [m+1, inf), quintic smoothstep between.
double theta_cutoff(double m, double x);

enum class RunStatus { completed, guard_exceeded };

struct Snapshot {
  std::size_t step = 0;
  double t = 0.0;
  VelocityField state;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<NormTriple> norms;
  /// Atoms applied in the step ending at times[i]; jumps[0] = 0.
  std::vector<std::uint32_t> jumps;
  /// Running Girsanov log-weight log M^eps_t (0 for the unit control).
  std::vector<double> log_weight;
  /// Running sup_s |u|_H^2 + int_0^t |u|_V^2 ds.
  std::vector<double> upsilon_h;
  /// Running sup_s |u|_V^2 + int_0^t |u|_D(A)^2 ds.
  std::vector<double> upsilon_v;
  std::vector<Snapshot> snapshots;
  std::optional<VelocityField> final_state;
  RunStatus status = RunStatus::completed;
  std::optional<double> blowup_time;

  std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }
  double final_log_weight() const { return log_weight.empty() ? 0.0 : log_weight.back(); }
};

/// One step as described above. `jump_marks` are the marks of atoms in
/// (t, t + dt]; `control` selects the tilted drift form when present;
/// `theta` scales the nonlinearity. Throws NumericalFailure on non-finite output.
VelocityField step(const VelocityField& state, const SolverParams& params, const NoiseCoefficient& noise,
                   const MarkSpace& space, std::span<const std::size_t> jump_marks,
                   const ControlField* control, double t, double theta = 1.0);

/// Draws the base measure with r_max = bound_n / eps, thins at scale 1/eps
/// under `control` (unit when absent) and integrates. Records log M^eps_t.
/// With silent noise and no tilt nothing is sampled and the jump counts are 0.
Trajectory simulate(const VelocityField& u0, const SolverParams& params, const NoiseCoefficient& noise,
                    const MarkSpace& space, std::uint64_t seed,
                    const ControlField* control = nullptr);

/// Integrates against a given set of atoms (already thinned).
Trajectory simulate_with_atoms(const VelocityField& u0, const SolverParams& params,
                               const NoiseCoefficient& noise, const MarkSpace& space,
                               const CountingSample& atoms, const ControlField* control);

struct EnergySummary {
  double sup_h2 = 0.0;
  double int_v2 = 0.0;
  double sup_v2 = 0.0;
  double int_da2 = 0.0;
  double upsilon_h() const { return sup_h2 + int_v2; }
  double upsilon_v() const { return sup_v2 + int_da2; }
};

/// Recomputes the path functionals from the norm series (trapezoid in time).
EnergySummary energy_diagnostic(const Trajectory& traj);

/// CSV header: t,h,v,da,jumps_this_step,log_weight_running
void write_trajectory_csv(const Trajectory& traj, std::ostream& os);

namespace detail {

/// Drift added to the explicit part of a step; called with u_n and the step midpoint.
struct DriftTerm {
  virtual ~DriftTerm() = default;
  virtual void add(const VelocityField& u, double t, VelocityField& acc) const = 0;
};

/// Post-continuous-substep hook applying jumps for step index k.
struct JumpTerm {
  virtual ~JumpTerm() = default;
  virtual void apply(std::size_t k, VelocityField& u) const = 0;
  virtual std::uint32_t count(std::size_t k) const = 0;
};

/// Shared deterministic core used by both the stochastic and skeleton solvers.
Trajectory integrate(const VelocityField& u0, const SolverParams& params, const DriftTerm* drift,
                     const JumpTerm* jumps, std::span<const double> log_weight_at_step);

/// Continuous substep: linear solve applied to u + dt * explicit.
VelocityField continuous_substep(const VelocityField& u, const VelocityField& explicit_terms,
                                 const SolverParams& params);

/// theta * B(u) + f(t), the drift-free explicit part.
VelocityField explicit_base(const VelocityField& u, const SolverParams& params, double t, double theta);

}  // namespace detail

}  // namespace jumpns
