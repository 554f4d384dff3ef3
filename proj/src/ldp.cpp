#include "jumpns/ldp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "jumpns/errors.hpp"
#include "jumpns/rng.hpp"

namespace jumpns {

namespace {
constexpr double kZ95 = 1.959963984540054;
}

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::terminal_energy_above: return "terminal_energy_above";
    case EventKind::sup_v_norm_above: return "sup_V_norm_above";
    case EventKind::terminal_distance_below: return "terminal_distance_below";
  }
  return "unknown";
}

EventKind event_kind_from_string(const std::string& s) {
  if (s == "terminal_energy_above") return EventKind::terminal_energy_above;
  if (s == "sup_V_norm_above" || s == "sup_v_norm_above") return EventKind::sup_v_norm_above;
  if (s == "terminal_distance_below") return EventKind::terminal_distance_below;
  throw ConfigError("unknown event kind '" + s + "'");
}

double EventFunctional::score(const Trajectory& traj) const {
  switch (kind) {
    case EventKind::terminal_energy_above: {
      const double h = traj.norms.back().h;
      return h * h;
    }
    case EventKind::sup_v_norm_above: {
      double s = 0.0;
      for (const auto& n : traj.norms) s = std::max(s, n.v);
      return s;
    }
    case EventKind::terminal_distance_below: {
      if (!reference) throw ConfigError("terminal_distance_below needs a reference field");
      if (!traj.final_state) throw ConfigError("trajectory has no final state");
      return norms(*traj.final_state - *reference).h;
    }
  }
  return 0.0;
}

bool EventFunctional::contains(const Trajectory& traj) const {
  const double s = score(traj);
  return kind == EventKind::terminal_distance_below ? s <= threshold : s >= threshold;
}

double EventFunctional::residual(const Trajectory& traj) const {
  const double s = score(traj);
  return kind == EventKind::terminal_distance_below ? std::max(0.0, s - threshold)
                                                    : std::max(0.0, threshold - s);
}

// ---------------------------------------------------------------------------

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f, std::vector<double> x0,
                             const NelderMeadOptions& opts) {
  const std::size_t n = x0.size();
  NelderMeadResult res;
  if (n == 0) {
    res.x = x0;
    res.fx = f(x0);
    res.evals = 1;
    res.converged = true;
    return res;
  }
  std::vector<std::vector<double>> pts(n + 1, x0);
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += opts.initial_step;
  int evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::max();
  };
  for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(pts[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), xr(n), xe(n), xc(n);
  bool converged = false;
  while (evals < opts.max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];

    double diameter = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      for (std::size_t d = 0; d < n; ++d) diameter = std::max(diameter, std::abs(pts[i][d] - pts[best][d]));
    }
    if (fv[worst] - fv[best] <= opts.ftol * (1.0 + std::abs(fv[best])) || diameter <= opts.xtol) {
      converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < n; ++d) centroid[d] += pts[order[i]][d] / static_cast<double>(n);
    }
    for (std::size_t d = 0; d < n; ++d) xr[d] = centroid[d] + (centroid[d] - pts[worst][d]);
    const double fr = eval(xr);
    if (fr < fv[best]) {
      for (std::size_t d = 0; d < n; ++d) xe[d] = centroid[d] + 2.0 * (xr[d] - centroid[d]);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        fv[worst] = fe;
      } else {
        pts[worst] = xr;
        fv[worst] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      pts[worst] = xr;
      fv[worst] = fr;
      continue;
    }
    const bool outside = fr < fv[worst];
    for (std::size_t d = 0; d < n; ++d) {
      xc[d] = outside ? centroid[d] + 0.5 * (xr[d] - centroid[d]) : centroid[d] + 0.5 * (pts[worst][d] - centroid[d]);
    }
    const double fc = eval(xc);
    if (fc < std::min(fr, fv[worst])) {
      pts[worst] = xc;
      fv[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t d = 0; d < n; ++d) pts[i][d] = pts[best][d] + 0.5 * (pts[i][d] - pts[best][d]);
      fv[i] = eval(pts[i]);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  res.x = pts[best];
  res.fx = fv[best];
  res.evals = evals;
  res.converged = converged;
  return res;
}

// ---------------------------------------------------------------------------

ControlField RateParameterization::decode(std::span<const double> log_g, double horizon,
                                          std::size_t marks) const {
  if (log_g.size() != dimension(marks)) throw ConfigError("rate parameterization: dimension mismatch");
  const double cap = std::log(static_cast<double>(bound_n));
  std::vector<double> values(log_g.size());
  for (std::size_t i = 0; i < log_g.size(); ++i) {
    const double x = std::clamp(log_g[i], -cap, cap);
    values[i] = x == 0.0 ? 1.0 : std::exp(x);
  }
  const int bound = std::max(1, ControlField::required_bound(values));
  return ControlField::uniform(horizon, intervals, marks, std::move(values), std::min(bound, bound_n));
}

namespace {

struct Evaluation {
  double rate = 0.0;
  double residual = 0.0;
  double target_residual = 0.0;
};

}  // namespace

RateEstimate minimize_rate(const EventFunctional& event, const SkeletonProblem& problem,
                           const RateParameterization& param, const OptimizerConfig& config,
                           std::uint64_t seed, const ControlField* warm_start) {
  const std::size_t marks = problem.space.size();
  const double horizon = problem.params.horizon;
  if (param.intervals == 0 || param.bound_n < 1) throw ConfigError("rate parameterization is empty");

  RateEstimate out{ControlField::unit(horizon, marks), 0.0, 0.0, false, {}, {}};

  // Zero-entropy control first: events containing the unperturbed path cost nothing.
  const ControlField unit = ControlField::unit(horizon, marks);
  const Trajectory base = solve_skeleton(problem, unit);
  if (event.contains(base)) {
    out.feasible = true;
    out.message = "event contains the g = 1 skeleton path";
    return out;
  }

  // Aim slightly inside the event so penalty solutions land strictly in it.
  const double margin = 0.1 * config.residual_tol;
  EventFunctional target = event;
  target.threshold += event.kind == EventKind::terminal_distance_below ? -margin : margin;

  auto evaluate = [&](std::span<const double> x) {
    const ControlField g = param.decode(x, horizon, marks);
    const Trajectory tr = solve_skeleton(problem, g);
    return Evaluation{entropy_LT(g, problem.space), event.residual(tr), target.residual(tr)};
  };

  std::vector<double> best_feasible_x;
  double best_feasible_rate = std::numeric_limits<double>::infinity();
  auto note = [&](std::span<const double> x, const Evaluation& e) {
    if (e.residual == 0.0 && e.rate < best_feasible_rate) {
      best_feasible_rate = e.rate;
      best_feasible_x.assign(x.begin(), x.end());
    }
  };

  const std::size_t dim = param.dimension(marks);
  std::vector<double> x(dim, 0.0);
  if (warm_start != nullptr && warm_start->marks() == marks && warm_start->intervals() == param.intervals) {
    for (std::size_t i = 0; i < dim; ++i) x[i] = std::log(warm_start->values()[i]);
  }

  double mu = config.penalty_start;
  double last_residual = std::numeric_limits<double>::infinity();
  for (int level = 0; level < config.penalty_levels; ++level, mu *= config.penalty_factor) {
    int evals = 0;
    auto objective = [&](std::span<const double> z) {
      const Evaluation e = evaluate(z);
      note(z, e);
      return e.rate + mu * e.target_residual * e.target_residual;
    };
    NelderMeadResult best = nelder_mead(objective, x, config.simplex);
    evals += best.evals;
    for (int r = 0; r < config.restarts; ++r) {
      RandomStream rng(stream_seed(seed, static_cast<std::uint64_t>(level) * 1000 + r));
      std::vector<double> start = best.x;
      for (double& v : start) v += config.restart_spread * rng.normal();
      NelderMeadOptions opts = config.simplex;
      opts.initial_step *= 0.5;
      NelderMeadResult cand = nelder_mead(objective, start, opts);
      evals += cand.evals;
      // Polish from the incumbent too; restarts only replace it when better.
      if (cand.fx < best.fx) best = std::move(cand);
    }
    x = best.x;
    const Evaluation e = evaluate(x);
    note(x, e);
    out.optimizer_trace.push_back({mu, evals, best.fx, e.rate, e.residual});
    last_residual = e.residual;
    if (e.residual == 0.0) break;
  }

  // Radial restoration for events reached by pushing the control further out.
  if (last_residual > 0.0 && event.kind != EventKind::terminal_distance_below) {
    auto scaled = [&](double s) {
      std::vector<double> z(x);
      for (double& v : z) v *= s;
      return z;
    };
    double hi = 1.0;
    bool found = false;
    for (int i = 0; i < 8 && !found; ++i) {
      hi *= 1.5;
      const auto z = scaled(hi);
      const Evaluation e = evaluate(z);
      note(z, e);
      found = e.residual == 0.0;
    }
    if (found) {
      double lo = 1.0;
      for (int i = 0; i < 50; ++i) {
        const double mid = 0.5 * (lo + hi);
        const auto z = scaled(mid);
        const Evaluation e = evaluate(z);
        note(z, e);
        (e.residual == 0.0 ? hi : lo) = mid;
      }
    }
  }

  // Only points whose skeleton lies inside the event are reported feasible.
  std::vector<double> chosen = x;
  Evaluation final_eval = evaluate(x);
  if (!best_feasible_x.empty() && (final_eval.residual > 0.0 || best_feasible_rate <= final_eval.rate)) {
    chosen = best_feasible_x;
    final_eval = evaluate(chosen);
  }
  out.control = param.decode(chosen, horizon, marks);
  out.rate_value = entropy_LT(out.control, problem.space);
  out.constraint_residual = final_eval.residual;
  out.feasible = final_eval.residual == 0.0;
  out.message = out.feasible ? "feasible" : "no penalty level reached the event";
  return out;
}

// ---------------------------------------------------------------------------

std::pair<double, double> wilson_interval(std::size_t hits, std::size_t n) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(hits) / nn;
  const double z2 = kZ95 * kZ95;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = kZ95 * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  const double lo = hits == 0 ? 0.0 : std::max(0.0, centre - half);
  const double hi = hits == n ? 1.0 : std::min(1.0, centre + half);
  return {lo, hi};
}

namespace {

struct SampleOutcome {
  bool hit = false;
  double weight = 1.0;
};

std::vector<SampleOutcome> run_samples(const EventFunctional& event, double eps, std::size_t n,
                                       std::uint64_t seed, const SkeletonProblem& problem,
                                       const ControlField* control) {
  SolverParams params = problem.params;
  params.eps = eps;
  params.snapshot_stride = 0;
  std::vector<SampleOutcome> out(n);
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < count; ++i) {
    const Trajectory tr =
        simulate(problem.u0, params, problem.noise, problem.space, stream_seed(seed, static_cast<std::uint64_t>(i)),
                 control);
    auto& o = out[static_cast<std::size_t>(i)];
    o.hit = event.contains(tr);
    o.weight = std::exp(tr.final_log_weight());
  }
  return out;
}

}  // namespace

ProbabilityEstimate mc_probability(const EventFunctional& event, double eps, std::size_t n_samples,
                                   std::uint64_t seed, const SkeletonProblem& problem) {
  ProbabilityEstimate est;
  est.samples = n_samples;
  if (n_samples == 0) throw ConfigError("mc_probability: n_samples must be >= 1");
  const auto outcomes = run_samples(event, eps, n_samples, seed, problem, nullptr);
  for (const auto& o : outcomes) est.hits += o.hit ? 1 : 0;
  const double n = static_cast<double>(n_samples);
  est.p_hat = static_cast<double>(est.hits) / n;
  std::tie(est.lower, est.upper) = wilson_interval(est.hits, n_samples);
  est.std_error = std::sqrt(est.p_hat * (1.0 - est.p_hat) / n);
  est.effective_sample_size = static_cast<double>(est.hits);
  return est;
}

ProbabilityEstimate importance_sampled_probability(const EventFunctional& event, double eps,
                                                   const ControlField& tilt, std::size_t n_samples,
                                                   std::uint64_t seed, const SkeletonProblem& problem,
                                                   std::vector<double>* weights_out) {
  if (n_samples == 0) throw ConfigError("importance_sampled_probability: n_samples must be >= 1");
  if (tilt.marks() != problem.space.size()) throw ConfigError("tilt and mark space differ in size");
  const auto outcomes = run_samples(event, eps, n_samples, seed, problem, &tilt);
  ProbabilityEstimate est;
  est.samples = n_samples;
  est.weighted = true;
  double sum = 0.0, sum_sq = 0.0;
  if (weights_out) weights_out->clear();
  for (const auto& o : outcomes) {
    if (weights_out) weights_out->push_back(o.weight);
    if (!o.hit) continue;
    ++est.hits;
    sum += o.weight;
    sum_sq += o.weight * o.weight;
  }
  const double n = static_cast<double>(n_samples);
  est.p_hat = sum / n;
  const double var = n > 1 ? std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0)) : 0.0;
  est.std_error = std::sqrt(var / n);
  est.lower = std::max(0.0, est.p_hat - kZ95 * est.std_error);
  est.upper = est.p_hat + kZ95 * est.std_error;
  est.effective_sample_size = sum_sq > 0.0 ? sum * sum / sum_sq : 0.0;
  return est;
}

// ---------------------------------------------------------------------------

ScalingTable ldp_scaling_table(const EventFunctional& event, const std::vector<double>& eps_grid,
                               const std::vector<ScalingBudget>& budgets, const RateEstimate& rate,
                               const SkeletonProblem& problem, const ScalingOptions& options) {
  if (eps_grid.size() < 3) throw ConfigError("ldp_scaling_table: eps grid needs at least 3 values");
  if (budgets.size() != eps_grid.size()) throw ConfigError("ldp_scaling_table: one budget per eps value");
  for (std::size_t i = 1; i < eps_grid.size(); ++i) {
    if (!(eps_grid[i] < eps_grid[i - 1])) throw ConfigError("ldp_scaling_table: eps grid must decrease");
  }
  ScalingTable table;
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    ScalingRow row;
    row.eps = eps_grid[i];
    row.rate_value = rate.rate_value;
    const std::uint64_t row_seed = stream_seed(options.seed, 7919 + i);
    if (budgets[i].plain > 0) {
      row.plain = mc_probability(event, row.eps, budgets[i].plain, stream_seed(row_seed, 1), problem);
    }
    if (budgets[i].tilted > 0) {
      row.tilted = importance_sampled_probability(event, row.eps, rate.control, budgets[i].tilted,
                                                  stream_seed(row_seed, 2), problem);
    }
    const auto* used = row.tilted ? &*row.tilted : (row.plain ? &*row.plain : nullptr);
    if (used) {
      row.p_hat = used->p_hat;
      row.hits = used->hits;
      row.neg_eps_log_p = row.p_hat > 0.0 ? -row.eps * std::log(row.p_hat) : std::numeric_limits<double>::infinity();
      row.insufficient_hits = row.hits < options.min_hits;
    }
    table.rows.push_back(std::move(row));
  }

  for (std::size_t i = table.rows.size(); i-- > 0;) {
    if (!table.rows[i].insufficient_hits) {
      table.checked_row = i;
      break;
    }
  }
  if (table.checked_row) {
    const auto& row = table.rows[*table.checked_row];
    if (rate.rate_value > 0.0) {
      table.relative_gap = std::abs(row.neg_eps_log_p - rate.rate_value) / rate.rate_value;
      table.within_band = table.relative_gap <= options.band;
    } else {
      table.relative_gap = row.neg_eps_log_p;
      table.within_band = row.neg_eps_log_p <= options.band;
    }
  }

  for (const auto& row : table.rows) {
    if (row.plain && row.tilted && row.plain->hits >= options.min_hits) {
      const bool overlap = row.plain->lower <= row.tilted->upper && row.tilted->lower <= row.plain->upper;
      table.estimators_agree = table.estimators_agree && overlap;
    }
  }

  // -eps log p along the grid, with intervals from the probability bounds.
  struct Band {
    double lo, mid, hi;
  };
  std::vector<Band> bands;
  for (const auto& row : table.rows) {
    if (row.insufficient_hits) continue;
    const auto& e = row.tilted ? *row.tilted : *row.plain;
    const double hi = e.lower > 0.0 ? -row.eps * std::log(e.lower) : std::numeric_limits<double>::infinity();
    const double lo = -row.eps * std::log(std::min(1.0, e.upper));
    bands.push_back({lo, row.neg_eps_log_p, hi});
  }
  if (bands.size() >= 2) {
    const double direction = bands.back().mid - bands.front().mid;
    for (std::size_t i = 1; i < bands.size(); ++i) {
      const bool against = direction >= 0.0 ? bands[i].mid < bands[i - 1].mid : bands[i].mid > bands[i - 1].mid;
      const bool overlap = bands[i].lo <= bands[i - 1].hi && bands[i - 1].lo <= bands[i].hi;
      if (against && !overlap) table.monotone = false;
    }
  }
  return table;
}

EnsembleStats ensemble_upsilon(const SkeletonProblem& problem, double eps, std::size_t n_samples,
                               std::uint64_t seed, const ControlField* control) {
  SolverParams params = problem.params;
  params.eps = eps;
  params.snapshot_stride = 0;
  std::vector<double> values(n_samples);
  std::vector<char> guard(n_samples, 0);
  const auto count = static_cast<std::int64_t>(n_samples);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < count; ++i) {
    const Trajectory tr = simulate(problem.u0, params, problem.noise, problem.space,
                                   stream_seed(seed, static_cast<std::uint64_t>(i)), control);
    values[static_cast<std::size_t>(i)] = tr.upsilon_h.back();
    guard[static_cast<std::size_t>(i)] = tr.status == RunStatus::guard_exceeded ? 1 : 0;
  }
  EnsembleStats s;
  s.samples = n_samples;
  if (n_samples == 0) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(n_samples);
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std_dev = n_samples > 1 ? std::sqrt(ss / static_cast<double>(n_samples - 1)) : 0.0;
  s.std_error = s.std_dev / std::sqrt(static_cast<double>(n_samples));
  s.guard_hits = static_cast<std::size_t>(std::count(guard.begin(), guard.end(), 1));
  return s;
}

}  // namespace jumpns
