#include "jumpns/spde.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "jumpns/errors.hpp"

namespace jumpns {

bool NoiseCoefficient::silent() const {
  return std::all_of(sigma.begin(), sigma.end(), [](double s) { return s == 0.0; });
}

double NoiseCoefficient::lipschitz(std::size_t j) const { return std::abs(sigma.at(j)) * std::abs(linear_gain); }

double NoiseCoefficient::growth_v(std::size_t j) const {
  return std::abs(sigma.at(j)) * std::max(norms(base).v, std::abs(linear_gain));
}

double NoiseCoefficient::growth_h(std::size_t j) const {
  return std::abs(sigma.at(j)) * std::max(norms(base).h, std::abs(linear_gain));
}

namespace {

/// b + c u, the mark-independent part of G.
VelocityField noise_direction(const NoiseCoefficient& noise, const VelocityField& u) {
  VelocityField w = noise.base;
  if (noise.linear_gain != 0.0) w.axpy(noise.linear_gain, u);
  return w;
}

}  // namespace

VelocityField g_eval(const NoiseCoefficient& noise, const VelocityField& u, std::size_t mark) {
  if (mark >= noise.marks()) throw ConfigError("g_eval: mark index out of range");
  const double s = noise.sigma[mark];
  if (s == 0.0) return VelocityField::zero(u.grid());
  VelocityField w = noise_direction(noise, u);
  w *= s;
  return w;
}

// ---------------------------------------------------------------------------

Forcing Forcing::constant(VelocityField f) { return Forcing({0.0}, {std::move(f)}); }

Forcing::Forcing(std::vector<double> starts, std::vector<VelocityField> fields)
    : starts_(std::move(starts)), fields_(std::move(fields)) {
  if (starts_.size() != fields_.size()) throw ConfigError("forcing: starts and fields differ in length");
  if (!fields_.empty() && starts_.front() != 0.0) throw ConfigError("forcing: first segment must start at 0");
  for (std::size_t i = 1; i < starts_.size(); ++i) {
    if (!(starts_[i] > starts_[i - 1])) throw ConfigError("forcing: segment starts must increase");
  }
}

const VelocityField* Forcing::at(double t) const {
  if (fields_.empty()) return nullptr;
  const auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
  const auto i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - starts_.begin()) - 1));
  return &fields_[i];
}

std::size_t SolverParams::steps() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("solver.dt must be positive");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("solver.T must be positive");
  const double ratio = horizon / dt;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw ConfigError("solver.dt must divide solver.T");
  }
  return static_cast<std::size_t>(rounded);
}

double theta_cutoff(double m, double x) {
  if (x <= m) return 1.0;
  if (x >= m + 1.0) return 0.0;
  const double s = x - m;
  return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

// ---------------------------------------------------------------------------

namespace detail {

VelocityField explicit_base(const VelocityField& u, const SolverParams& params, double t, double theta) {
  VelocityField acc = (params.nonlinear && theta != 0.0) ? bilinear(u, u) : VelocityField::zero(u.grid());
  if (params.nonlinear && theta != 0.0 && theta != 1.0) acc *= theta;
  if (const VelocityField* f = params.forcing.at(t)) acc += *f;
  return acc;
}

VelocityField continuous_substep(const VelocityField& u, const VelocityField& explicit_terms,
                                 const SolverParams& params) {
  const auto& grid = u.grid();
  CoefficientPair c = u.coeffs();
  const auto nx = explicit_terms.x();
  const auto ny = explicit_terms.y();
  const double dt = params.dt;
  for (std::size_t f = 0; f < grid.size(); ++f) {
    const double lam = params.viscosity * grid.kappa_sq(f);
    if (params.scheme == StokesScheme::implicit_euler) {
      const double inv = 1.0 / (1.0 + dt * lam);
      c.x[f] = (c.x[f] + dt * nx[f]) * inv;
      c.y[f] = (c.y[f] + dt * ny[f]) * inv;
    } else {
      const double decay = std::exp(-dt * lam);
      const double gain = lam > 0.0 ? -std::expm1(-dt * lam) / lam : dt;
      c.x[f] = decay * c.x[f] + gain * nx[f];
      c.y[f] = decay * c.y[f] + gain * ny[f];
    }
  }
  return VelocityField(grid, std::move(c));
}

Trajectory integrate(const VelocityField& u0, const SolverParams& params, const DriftTerm* drift,
                     const JumpTerm* jumps, std::span<const double> log_weight_at_step) {
  const std::size_t steps = params.steps();
  if (!log_weight_at_step.empty() && log_weight_at_step.size() != steps) {
    throw ConfigError("integrate: log-weight table length mismatch");
  }
  if (!u0.all_finite()) throw NumericalFailure("initial state has non-finite coefficients");

  Trajectory tr;
  tr.times.reserve(steps + 1);
  tr.norms.reserve(steps + 1);
  tr.jumps.reserve(steps + 1);
  tr.log_weight.reserve(steps + 1);
  tr.upsilon_h.reserve(steps + 1);
  tr.upsilon_v.reserve(steps + 1);

  VelocityField u = u0;
  NormTriple nt = norms(u);
  double sup_h2 = nt.h * nt.h, int_v2 = 0.0;
  double sup_v2 = nt.v * nt.v, int_da2 = 0.0;
  tr.times.push_back(0.0);
  tr.norms.push_back(nt);
  tr.jumps.push_back(0);
  tr.log_weight.push_back(0.0);
  tr.upsilon_h.push_back(sup_h2);
  tr.upsilon_v.push_back(sup_v2);
  if (params.snapshot_stride > 0) tr.snapshots.push_back({0, 0.0, u});

  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * params.dt;
    double theta = 1.0;
    if (params.cutoff_m) theta = theta_cutoff(*params.cutoff_m, std::sqrt(sup_h2) + std::sqrt(int_v2));

    VelocityField rhs = explicit_base(u, params, t, theta);
    // Controls are looked up at the step midpoint so steps never straddle a breakpoint's value.
    if (drift) drift->add(u, t + 0.5 * params.dt, rhs);
    VelocityField next = continuous_substep(u, rhs, params);
    if (jumps) jumps->apply(k, next);

    if (!next.all_finite()) {
      std::ostringstream msg;
      msg << std::setprecision(17) << "non-finite state at step " << (k + 1) << " (t = " << t + params.dt
          << "); previous norms h = " << nt.h << ", v = " << nt.v << ", da = " << nt.da
          << ", theta = " << theta << ", dt = " << params.dt;
      throw NumericalFailure(msg.str());
    }

    const NormTriple prev = nt;
    u = std::move(next);
    nt = norms(u);
    const double t1 = static_cast<double>(k + 1) * params.dt;
    sup_h2 = std::max(sup_h2, nt.h * nt.h);
    sup_v2 = std::max(sup_v2, nt.v * nt.v);
    int_v2 += 0.5 * (t1 - t) * (prev.v * prev.v + nt.v * nt.v);
    int_da2 += 0.5 * (t1 - t) * (prev.da * prev.da + nt.da * nt.da);

    tr.times.push_back(t1);
    tr.norms.push_back(nt);
    tr.jumps.push_back(jumps ? jumps->count(k) : 0);
    tr.log_weight.push_back(log_weight_at_step.empty() ? 0.0 : log_weight_at_step[k]);
    tr.upsilon_h.push_back(sup_h2 + int_v2);
    tr.upsilon_v.push_back(sup_v2 + int_da2);
    if (params.snapshot_stride > 0 && (k + 1) % params.snapshot_stride == 0) {
      tr.snapshots.push_back({k + 1, t1, u});
    }
    if (params.guard && sup_h2 + int_v2 > *params.guard) {
      tr.status = RunStatus::guard_exceeded;
      tr.blowup_time = t1;
      break;
    }
  }
  tr.final_state = std::move(u);
  return tr;
}

}  // namespace detail

// ---------------------------------------------------------------------------

namespace {

/// Compensator of eps * int G (N^{phi/eps} - eps^-1 nu dt), written in either form.
class CompensatorDrift final : public detail::DriftTerm {
 public:
  CompensatorDrift(const NoiseCoefficient& noise, const MarkSpace& space, const ControlField* control,
                   CompensationForm form)
      : noise_(noise), space_(space), control_(control), form_(form) {}

  void add(const VelocityField& u, double t, VelocityField& acc) const override {
    if (noise_.silent()) return;
    const VelocityField w = noise_direction(noise_, u);
    if (form_ == CompensationForm::base_rate || control_ == nullptr) {
      double rate = 0.0;
      for (std::size_t j = 0; j < noise_.marks(); ++j) rate += noise_.sigma[j] * space_.weight(j);
      acc.axpy(-rate, w);
      return;
    }
    // Tilted form: compensate at phi nu, then add back G (phi - 1) nu.
    const std::size_t i = control_->interval_of(t);
    double tilted = 0.0, shift = 0.0;
    for (std::size_t j = 0; j < noise_.marks(); ++j) {
      const double phi = control_->value(i, j);
      tilted += noise_.sigma[j] * phi * space_.weight(j);
      shift += noise_.sigma[j] * (phi - 1.0) * space_.weight(j);
    }
    acc.axpy(-tilted, w);
    acc.axpy(shift, w);
  }

 private:
  const NoiseCoefficient& noise_;
  const MarkSpace& space_;
  const ControlField* control_;
  CompensationForm form_;
};

/// Atoms binned by step; all atoms of a step act on the same left limit u^-.
class BinnedJumps final : public detail::JumpTerm {
 public:
  BinnedJumps(const NoiseCoefficient& noise, double eps, std::vector<std::vector<std::size_t>> bins)
      : noise_(noise), eps_(eps), bins_(std::move(bins)) {}

  void apply(std::size_t k, VelocityField& u) const override {
    const auto& marks = bins_[k];
    if (marks.empty()) return;
    double s = 0.0;
    for (std::size_t m : marks) s += noise_.sigma.at(m);
    if (s == 0.0) return;
    const VelocityField w = noise_direction(noise_, u);
    u.axpy(eps_ * s, w);
  }
  std::uint32_t count(std::size_t k) const override { return static_cast<std::uint32_t>(bins_[k].size()); }

 private:
  const NoiseCoefficient& noise_;
  double eps_;
  std::vector<std::vector<std::size_t>> bins_;
};

void check_noise(const NoiseCoefficient& noise, const MarkSpace& space, const VelocityField& u0) {
  if (noise.marks() != space.size()) throw ConfigError("noise sigma table and mark space differ in size");
  if (!(noise.base.grid() == u0.grid())) throw ConfigError("noise base field and state grids differ");
}

std::size_t step_index(double t, double dt, std::size_t steps) {
  const double c = std::ceil(t / dt);
  if (c < 1.0) return 0;
  return std::min(steps - 1, static_cast<std::size_t>(c) - 1);
}

}  // namespace

VelocityField step(const VelocityField& state, const SolverParams& params, const NoiseCoefficient& noise,
                   const MarkSpace& space, std::span<const std::size_t> jump_marks,
                   const ControlField* control, double t, double theta) {
  check_noise(noise, space, state);
  CompensatorDrift drift(noise, space, control, params.compensation);
  VelocityField rhs = detail::explicit_base(state, params, t, theta);
  drift.add(state, t + 0.5 * params.dt, rhs);
  VelocityField next = detail::continuous_substep(state, rhs, params);
  BinnedJumps jumps(noise, params.eps, {std::vector<std::size_t>(jump_marks.begin(), jump_marks.end())});
  jumps.apply(0, next);
  if (!next.all_finite()) {
    std::ostringstream msg;
    const NormTriple nt = norms(state);
    msg << "non-finite state after step at t = " << t << "; input norms h = " << nt.h << ", v = " << nt.v
        << ", da = " << nt.da;
    throw NumericalFailure(msg.str());
  }
  return next;
}

Trajectory simulate_with_atoms(const VelocityField& u0, const SolverParams& params,
                               const NoiseCoefficient& noise, const MarkSpace& space,
                               const CountingSample& atoms, const ControlField* control) {
  check_noise(noise, space, u0);
  if (!(params.eps > 0.0)) throw ConfigError("solver.eps must be positive");
  const std::size_t steps = params.steps();
  std::vector<std::vector<std::size_t>> bins(steps);
  std::vector<double> log_jump(steps, 0.0);
  const bool tilted = control != nullptr && !control->is_unit();
  for (const auto& p : atoms.points) {
    const std::size_t k = step_index(p.t, params.dt, steps);
    bins[k].push_back(p.mark);
    if (tilted) log_jump[k] -= std::log((*control)(p.t, p.mark));
  }
  std::vector<double> log_weight;
  if (tilted) {
    log_weight.resize(steps);
    double acc = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
      acc += log_jump[k];
      const double t1 = static_cast<double>(k + 1) * params.dt;
      log_weight[k] = acc + girsanov_compensator(*control, params.eps, space, t1);
    }
  }
  CompensatorDrift drift(noise, space, control, params.compensation);
  BinnedJumps jumps(noise, params.eps, std::move(bins));
  return detail::integrate(u0, params, &drift, &jumps, log_weight);
}

Trajectory simulate(const VelocityField& u0, const SolverParams& params, const NoiseCoefficient& noise,
                    const MarkSpace& space, std::uint64_t seed, const ControlField* control) {
  check_noise(noise, space, u0);
  if (!(params.eps > 0.0)) throw ConfigError("solver.eps must be positive");
  const ControlField unit = ControlField::unit(params.horizon, space.size());
  const ControlField& phi = control ? *control : unit;
  if (phi.marks() != space.size()) throw ConfigError("control and mark space differ in size");
  // Noise off and no tilt: the run is deterministic, nothing to sample.
  if (noise.silent() && phi.is_unit()) return simulate_with_atoms(u0, params, noise, space, {params.horizon, {}}, control);
  const double r_max = static_cast<double>(phi.bound_n()) / params.eps;
  const MarkedPointSample base = sample_base_prm(seed, params.horizon, space, r_max);
  const CountingSample atoms = thin(base, phi, 1.0 / params.eps);
  return simulate_with_atoms(u0, params, noise, space, atoms, control);
}

EnergySummary energy_diagnostic(const Trajectory& traj) {
  EnergySummary s;
  for (std::size_t i = 0; i < traj.norms.size(); ++i) {
    const auto& n = traj.norms[i];
    s.sup_h2 = std::max(s.sup_h2, n.h * n.h);
    s.sup_v2 = std::max(s.sup_v2, n.v * n.v);
    if (i > 0) {
      const double dt = traj.times[i] - traj.times[i - 1];
      const auto& p = traj.norms[i - 1];
      s.int_v2 += 0.5 * dt * (p.v * p.v + n.v * n.v);
      s.int_da2 += 0.5 * dt * (p.da * p.da + n.da * n.da);
    }
  }
  return s;
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
  os << "t,h,v,da,jumps_this_step,log_weight_running\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const auto& n = traj.norms[i];
    os << traj.times[i] << ',' << n.h << ',' << n.v << ',' << n.da << ',' << traj.jumps[i] << ','
       << traj.log_weight[i] << '\n';
  }
}

}  // namespace jumpns
