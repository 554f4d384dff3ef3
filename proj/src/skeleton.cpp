#include "jumpns/skeleton.hpp"

#include <algorithm>
#include <cmath>

#include "jumpns/errors.hpp"

namespace jumpns {

namespace {

void check_problem(const SkeletonProblem& p, const ControlField& g) {
  if (p.noise.marks() != p.space.size()) throw ConfigError("noise sigma table and mark space differ in size");
  if (g.marks() != p.space.size()) throw ConfigError("control and mark space differ in size");
  if (!(p.noise.base.grid() == p.u0.grid())) throw ConfigError("noise base field and state grids differ");
}

class ShiftedDrift final : public detail::DriftTerm {
 public:
  ShiftedDrift(const NoiseCoefficient& noise, const ControlField& g, const MarkSpace& space)
      : noise_(noise), g_(g), space_(space) {}

  void add(const VelocityField& u, double t, VelocityField& acc) const override {
    const std::size_t i = g_.interval_of(t);
    double coeff = 0.0;
    bool active = false;
    for (std::size_t j = 0; j < noise_.marks(); ++j) {
      const double gj = g_.value(i, j);
      if (gj == 1.0 || noise_.sigma[j] == 0.0) continue;
      coeff += noise_.sigma[j] * (gj - 1.0) * space_.weight(j);
      active = true;
    }
    if (!active) return;
    VelocityField w = noise_.base;
    if (noise_.linear_gain != 0.0) w.axpy(noise_.linear_gain, u);
    acc.axpy(coeff, w);
  }

 private:
  const NoiseCoefficient& noise_;
  const ControlField& g_;
  const MarkSpace& space_;
};

}  // namespace

VelocityField shifted_drift(const VelocityField& u, const NoiseCoefficient& noise, const ControlField& g,
                            double t, const MarkSpace& space) {
  if (g.marks() != space.size() || noise.marks() != space.size()) {
    throw ConfigError("shifted_drift: control, noise and mark space differ in size");
  }
  VelocityField acc = VelocityField::zero(u.grid());
  const std::size_t i = g.interval_of(t);
  for (std::size_t j = 0; j < space.size(); ++j) {
    const double c = (g.value(i, j) - 1.0) * space.weight(j);
    if (c == 0.0) continue;
    acc.axpy(c, g_eval(noise, u, j));
  }
  return acc;
}

Trajectory solve_skeleton(const SkeletonProblem& problem, const ControlField& g) {
  check_problem(problem, g);
  ShiftedDrift drift(problem.noise, g, problem.space);
  return detail::integrate(problem.u0, problem.params, &drift, nullptr, {});
}

Trajectory solve_skeleton(const SkeletonProblem& problem) { return solve_skeleton(problem, problem.g); }

double upsilon_v_distance(const Trajectory& a, const Trajectory& b) {
  if (a.snapshots.size() != a.times.size() || b.snapshots.size() != b.times.size() ||
      a.times.size() != b.times.size()) {
    throw ConfigError("upsilon_v_distance needs two full-resolution runs of equal length");
  }
  double sup_v2 = 0.0, int_da2 = 0.0, prev_da2 = 0.0;
  for (std::size_t i = 0; i < a.times.size(); ++i) {
    const NormTriple d = norms(a.snapshots[i].state - b.snapshots[i].state);
    sup_v2 = std::max(sup_v2, d.v * d.v);
    const double da2 = d.da * d.da;
    if (i > 0) int_da2 += 0.5 * (a.times[i] - a.times[i - 1]) * (prev_da2 + da2);
    prev_da2 = da2;
  }
  return sup_v2 + int_da2;
}

std::vector<double> skeleton_continuity_probe(const std::vector<ControlField>& g_sequence,
                                              const ControlField& g_limit, const SkeletonProblem& problem) {
  SkeletonProblem full = problem;
  full.params.snapshot_stride = 1;
  const Trajectory limit = solve_skeleton(full, g_limit);
  std::vector<double> out;
  out.reserve(g_sequence.size());
  for (const auto& g : g_sequence) out.push_back(upsilon_v_distance(solve_skeleton(full, g), limit));
  return out;
}

}  // namespace jumpns
