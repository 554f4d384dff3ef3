#include "app/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "app/record.hpp"
#include "app/verify.hpp"
#include "jumpns/errors.hpp"
#include "jumpns/field_io.hpp"
#include "jumpns/rng.hpp"

namespace jumpns::app {

namespace fs = std::filesystem;

namespace {

/// Thrown after outputs are written when the run itself must report failure.
struct ExitWith {
  int code;
  std::string message;
};

std::string numbered(const char* stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03zu%s", stem, i, ext);
  return buf;
}

Json norms_json(const NormTriple& n) { return {{"h", n.h}, {"v", n.v}, {"da", n.da}}; }

Json estimate_json(const ProbabilityEstimate& e) {
  return {{"p_hat", e.p_hat},   {"lower", e.lower},           {"upper", e.upper},
          {"std_error", e.std_error}, {"hits", e.hits}, {"samples", e.samples},
          {"effective_sample_size", e.effective_sample_size}, {"weighted", e.weighted}};
}

Json json_number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

void save_trajectory_csv(RunWriter& w, const std::string& name, const Trajectory& tr) {
  std::ostringstream os;
  write_trajectory_csv(tr, os);
  w.write_text(name, os.str());
}

/// Writes the stored snapshots of one run as field files.
void save_snapshots(RunWriter& w, const std::string& stem, const Trajectory& tr, const Json& provenance) {
  for (const auto& s : tr.snapshots) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s_step%06zu.jnsf", stem.c_str(), s.step);
    Json p = provenance;
    p["step"] = s.step;
    p["t"] = s.t;
    save_field(s.state, w.file(buf).string(), p);
    w.file(std::string(buf) + ".json");
  }
}

// ---------------------------------------------------------------------------

Json cmd_simulate(const RunConfig& cfg, RunWriter& w, std::ostream& log, bool quiet) {
  const SkeletonProblem p = build_problem(cfg);
  const bool tilted = !p.g.is_unit();
  const std::size_t n = cfg.experiment.n_traj;
  std::vector<std::optional<Trajectory>> runs(n);
  std::vector<std::string> failures(n);
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < count; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      runs[k] = simulate(p.u0, p.params, p.noise, p.space, stream_seed(cfg.experiment.seed, k),
                         tilted ? &p.g : nullptr);
    } catch (const NumericalFailure& e) {
      failures[k] = e.what();
    }
  }

  Json trajectories = Json::array();
  std::size_t guard_hits = 0, failed = 0;
  double mean_up_h = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Json t;
    t["index"] = i;
    t["seed"] = stream_seed(cfg.experiment.seed, i);
    if (!runs[i]) {
      ++failed;
      t["status"] = "numerical_failure";
      t["message"] = failures[i];
      trajectories.push_back(t);
      continue;
    }
    const Trajectory& tr = *runs[i];
    const std::string csv = numbered("traj", i, ".csv");
    save_trajectory_csv(w, csv, tr);
    const Json prov{{"run_id", w.id()}, {"trajectory", i}, {"seed", stream_seed(cfg.experiment.seed, i)}};
    const std::string fin = numbered("final", i, ".jnsf");
    save_field(*tr.final_state, w.file(fin).string(), prov);
    w.file(fin + ".json");
    save_snapshots(w, numbered("snap", i, ""), tr, prov);
    std::size_t jumps = 0;
    for (auto j : tr.jumps) jumps += j;
    const bool guard = tr.status == RunStatus::guard_exceeded;
    guard_hits += guard ? 1 : 0;
    mean_up_h += tr.upsilon_h.back() / static_cast<double>(n);
    t["file"] = csv;
    t["rows"] = tr.times.size();
    t["jumps"] = jumps;
    t["final_norms"] = norms_json(tr.norms.back());
    t["upsilon_h"] = tr.upsilon_h.back();
    t["upsilon_v"] = tr.upsilon_v.back();
    t["log_weight"] = tr.final_log_weight();
    t["status"] = guard ? "guard_exceeded" : "completed";
    if (tr.blowup_time) t["blowup_time"] = *tr.blowup_time;
    trajectories.push_back(t);
  }
  Json summary{{"command", "simulate"},
               {"run_id", w.id()},
               {"n_traj", n},
               {"eps", p.params.eps},
               {"tilted", tilted},
               {"guard_hits", guard_hits},
               {"numerical_failures", failed},
               {"mean_upsilon_h", failed == n ? Json(nullptr) : json_number(mean_up_h)},
               {"trajectories", trajectories}};
  w.write_json("summary.json", summary);
  if (!quiet) log << "simulate: " << n << " trajectories, " << guard_hits << " guard hits\n";
  if (failed > 0) throw ExitWith{kNumericalFailure, std::to_string(failed) + " trajectories produced non-finite states"};
  if (guard_hits > 0) throw ExitWith{kNumericalFailure, std::to_string(guard_hits) + " trajectories exceeded the guard"};
  return {{"n_traj", n}, {"guard_hits", guard_hits}};
}

// ---------------------------------------------------------------------------

struct Probe {
  std::vector<double> direction;
  std::size_t intervals = 1;
  std::vector<int> n;
};

Probe parse_probe(const Json& spec, std::size_t marks) {
  if (!spec.is_object()) throw ConfigError("experiment.probe: expected {direction, n}");
  Probe p;
  for (const auto& [k, v] : spec.items()) {
    if (k != "direction" && k != "n") throw ConfigError("experiment.probe: unknown key '" + k + "'");
  }
  const Json dir = spec.value("direction", Json(nullptr));
  if (!dir.is_object() || !dir.contains("values")) {
    throw ConfigError("experiment.probe.direction: expected {intervals, values}");
  }
  for (const auto& [k, v] : dir.items()) {
    if (k != "intervals" && k != "values") throw ConfigError("experiment.probe.direction: unknown key '" + k + "'");
  }
  p.intervals = dir.value("intervals", 1);
  p.direction = dir.at("values").get<std::vector<double>>();
  if (p.intervals < 1 || p.direction.size() != p.intervals * marks) {
    throw ConfigError("experiment.probe.direction.values: expected intervals * marks entries");
  }
  p.n = spec.value("n", std::vector<int>{1, 2, 4, 8, 16, 32, 64});
  for (int k : p.n) {
    if (k < 1) throw ConfigError("experiment.probe.n values must be >= 1");
  }
  return p;
}

Json cmd_skeleton(const RunConfig& cfg, RunWriter& w, std::ostream& log, bool quiet) {
  const SkeletonProblem p = build_problem(cfg);
  std::optional<Probe> probe;
  if (!cfg.experiment.probe.is_null()) probe = parse_probe(cfg.experiment.probe, p.space.size());

  const Trajectory tr = solve_skeleton(p);
  save_trajectory_csv(w, "skeleton.csv", tr);
  const Json prov{{"run_id", w.id()}, {"solver", "skeleton"}};
  save_field(*tr.final_state, w.file("skeleton_final.jnsf").string(), prov);
  w.file("skeleton_final.jnsf.json");
  save_snapshots(w, "snap", tr, prov);
  save_control(p.g, w.file("control.json").string());

  Json summary{{"command", "skeleton"},
               {"run_id", w.id()},
               {"entropy_LT", entropy_LT(p.g, p.space)},
               {"final_norms", norms_json(tr.norms.back())},
               {"upsilon_h", tr.upsilon_h.back()},
               {"upsilon_v", tr.upsilon_v.back()},
               {"status", tr.status == RunStatus::guard_exceeded ? "guard_exceeded" : "completed"}};
  if (probe) {
    std::vector<ControlField> seq;
    for (int k : probe->n) {
      std::vector<double> v(probe->direction.size());
      for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = 1.0 + probe->direction[i] / k;
        if (!(v[i] > 0.0)) throw ConfigError("experiment.probe: 1 + h/n must stay positive");
      }
      seq.push_back(ControlField::uniform(p.params.horizon, probe->intervals, p.space.size(), v,
                                          ControlField::required_bound(v)));
    }
    const auto d = skeleton_continuity_probe(seq, p.g, p);
    std::ostringstream os;
    os << std::setprecision(17) << "n,d_n\n";
    bool monotone = true;
    for (std::size_t i = 0; i < d.size(); ++i) {
      os << probe->n[i] << ',' << d[i] << '\n';
      if (i > 0 && !(d[i] < d[i - 1])) monotone = false;
    }
    w.write_text("probe.csv", os.str());
    summary["probe"] = {{"n", probe->n}, {"d_n", d}, {"strictly_decreasing", monotone}};
    if (!quiet) log << "skeleton: probe d_n " << (monotone ? "strictly decreasing" : "NOT monotone") << "\n";
  }
  w.write_json("summary.json", summary);
  if (!quiet) log << "skeleton: |u(T)|_H = " << tr.norms.back().h << "\n";
  if (tr.status == RunStatus::guard_exceeded) throw ExitWith{kNumericalFailure, "skeleton run exceeded the guard"};
  return {{"upsilon_h", tr.upsilon_h.back()}};
}

// ---------------------------------------------------------------------------

Json rate_json(const RateEstimate& r) {
  Json trace = Json::array();
  for (const auto& e : r.optimizer_trace) {
    trace.push_back({{"penalty", e.penalty}, {"evals", e.evals}, {"objective", e.objective}, {"rate", e.rate},
                     {"residual", e.residual}});
  }
  return {{"rate_value", r.rate_value}, {"constraint_residual", r.constraint_residual}, {"feasible", r.feasible},
          {"message", r.message},       {"control", Json::parse(control_to_json(r.control))},
          {"optimizer_trace", trace}};
}

void csv_estimate(std::ostream& os, const std::optional<ProbabilityEstimate>& e) {
  if (!e) {
    os << ",,,,";
    return;
  }
  os << ',' << e->p_hat << ',' << e->lower << ',' << e->upper << ',' << e->hits;
}

Json cmd_rate(const RunConfig& cfg, RunWriter& w, std::ostream& log, bool quiet) {
  const SkeletonProblem p = build_problem(cfg);
  const EventFunctional ev = build_event(cfg, p);
  const auto& ex = cfg.experiment;
  const bool want_table = !ex.eps_grid.empty();
  if (want_table && ex.eps_grid.size() < 3) throw ConfigError("experiment.eps_grid needs at least 3 values");
  if (want_table && ex.budgets.size() != ex.eps_grid.size()) {
    throw ConfigError("experiment.budgets must have one entry per eps_grid value");
  }

  const RateEstimate rate = minimize_rate(ev, p, ex.parameterization, ex.optimizer, stream_seed(ex.seed, 0));
  save_control(rate.control, w.file("control.json").string());
  Json summary{{"command", "rate"},
               {"run_id", w.id()},
               {"event", {{"kind", to_string(ev.kind)}, {"threshold", ev.threshold}}},
               {"rate", rate_json(rate)},
               {"seeds", {{"optimizer", stream_seed(ex.seed, 0)}, {"scaling", stream_seed(ex.seed, 1)}}}};
  if (!ex.planted.is_null()) {
    const ControlField planted = build_control(ex.planted, p.params.horizon, p.space.size(), cfg.base_dir,
                                               "experiment.planted");
    const double lt = entropy_LT(planted, p.space);
    summary["planted"] = {{"entropy_LT", lt}, {"bound_holds", rate.rate_value <= lt + 1e-3}};
  }
  if (!quiet) log << "rate: rate_value = " << rate.rate_value << (rate.feasible ? "" : " (infeasible)") << "\n";

  bool any_budget = false;
  for (const auto& b : ex.budgets) any_budget = any_budget || b.plain > 0 || b.tilted > 0;
  std::ostringstream csv;
  csv << std::setprecision(17)
      << "eps,p_hat,neg_eps_log_p,rate_value,hits,insufficient_hits,plain_p,plain_lower,plain_upper,plain_hits,"
         "tilted_p,tilted_lower,tilted_upper,tilted_hits,tilted_ess\n";
  if (want_table && any_budget && rate.feasible) {
    const ScalingTable t = ldp_scaling_table(ev, ex.eps_grid, ex.budgets, rate, p,
                                             {ex.min_hits, ex.band, stream_seed(ex.seed, 1)});
    Json rows = Json::array();
    for (const auto& row : t.rows) {
      csv << row.eps << ',' << row.p_hat << ',' << row.neg_eps_log_p << ',' << row.rate_value << ',' << row.hits
          << ',' << (row.insufficient_hits ? 1 : 0);
      csv_estimate(csv, row.plain);
      csv_estimate(csv, row.tilted);
      csv << ',' << (row.tilted ? row.tilted->effective_sample_size : 0.0) << '\n';
      Json r{{"eps", row.eps},
             {"p_hat", row.p_hat},
             {"neg_eps_log_p", json_number(row.neg_eps_log_p)},
             {"hits", row.hits},
             {"insufficient_hits", row.insufficient_hits}};
      if (row.plain) r["plain"] = estimate_json(*row.plain);
      if (row.tilted) r["tilted"] = estimate_json(*row.tilted);
      rows.push_back(r);
    }
    summary["scaling"] = {{"rows", rows},
                          {"checked_eps", t.checked_row ? Json(t.rows[*t.checked_row].eps) : Json(nullptr)},
                          {"relative_gap", t.relative_gap},
                          {"band", ex.band},
                          {"within_band", t.within_band},
                          {"estimators_agree", t.estimators_agree},
                          {"monotone", t.monotone}};
    if (!quiet) {
      log << "rate: scaling gap " << t.relative_gap << (t.within_band ? " within" : " outside") << " band\n";
    }
  } else {
    const std::string why = !want_table   ? "no eps_grid configured"
                            : !any_budget ? "all sample budgets are zero"
                                          : "no feasible control";
    summary["scaling"] = {{"rows", Json::array()}, {"skipped", why}};
    if (want_table) log << "warning: scaling table empty (" << why << ")\n";
  }
  w.write_text("scaling.csv", csv.str());
  w.write_json("summary.json", summary);
  if (!rate.feasible) throw ExitWith{kNumericalFailure, "no penalty level reached the event: " + rate.message};
  return {{"rate_value", rate.rate_value}, {"feasible", rate.feasible}};
}

// ---------------------------------------------------------------------------

Json cmd_mc(const RunConfig& cfg, RunWriter& w, std::ostream& log, bool quiet) {
  const SkeletonProblem p = build_problem(cfg);
  const EventFunctional ev = build_event(cfg, p);
  const auto& ex = cfg.experiment;
  if (ex.n_samples < 1) throw ConfigError("experiment.n_samples must be >= 1");
  const double eps = p.params.eps;
  const ProbabilityEstimate plain = mc_probability(ev, eps, ex.n_samples, ex.seed, p);
  Json summary{{"command", "mc"},
               {"run_id", w.id()},
               {"eps", eps},
               {"seed", ex.seed},
               {"event", {{"kind", to_string(ev.kind)}, {"threshold", ev.threshold}}},
               {"plain", estimate_json(plain)}};
  if (!ex.tilt.is_null()) {
    const ControlField tilt = build_control(ex.tilt, p.params.horizon, p.space.size(), cfg.base_dir,
                                            "experiment.tilt");
    std::vector<double> weights;
    const ProbabilityEstimate is = importance_sampled_probability(ev, eps, tilt, ex.n_samples, ex.seed, p, &weights);
    summary["tilted"] = estimate_json(is);
    summary["tilt_entropy_LT"] = entropy_LT(tilt, p.space);
    std::ostringstream os;
    os << std::setprecision(17) << "sample,weight\n";
    for (std::size_t i = 0; i < weights.size(); ++i) os << i << ',' << weights[i] << '\n';
    w.write_text("weights.csv", os.str());
  }
  w.write_json("mc.json", summary);
  if (!quiet) log << "mc: p_hat = " << plain.p_hat << " [" << plain.lower << ", " << plain.upper << "]\n";
  return {{"p_hat", plain.p_hat}, {"hits", plain.hits}};
}

// ---------------------------------------------------------------------------

Json cmd_verify(const RunConfig& cfg, RunWriter& w, std::ostream& log, bool quiet) {
  VerifyOptions o;
  o.suite = cfg.experiment.suite;
  o.tolerance_scale = cfg.experiment.tolerance_scale;
  o.seed = cfg.experiment.seed;
  if (!cfg.experiment.benchmark_dir.empty()) {
    const fs::path b(cfg.experiment.benchmark_dir);
    o.benchmark_dir = b.is_absolute() || cfg.base_dir.empty() ? b : cfg.base_dir / b;
  }
  bool any = false;
  for (const auto& c : list_checks()) any = any || selector_matches(o.suite, c);
  if (!any) throw ConfigError("verify: selector '" + o.suite + "' matches no checks");
  const auto results = run_verify(o, quiet ? nullptr : &log);
  Json checks = Json::array();
  Json timings = Json::object();
  bool ok = !results.empty();
  for (const auto& r : results) {
    checks.push_back(r.to_json());
    timings[r.id] = r.seconds;
    ok = ok && r.passed;
  }
  Json report{{"suite", o.suite}, {"tolerance_scale", o.tolerance_scale}, {"seed", o.seed},
              {"passed", ok},     {"checks", checks}};
  w.write_json("report.json", report);
  if (!quiet) log << "verify: " << (ok ? "all checks passed" : "FAILED") << "\n";
  if (!ok) throw ExitWith{kVerifyFailure, "verify suite failed"};
  return {{"passed", ok}, {"seconds", timings}};
}

}  // namespace

CommandResult run_command(const std::string& command, const GlobalOptions& options, std::ostream& out,
                          std::ostream& err) {
  CommandResult result;
  std::optional<RunWriter> writer;
  try {
    static const std::vector<std::string> known{"simulate", "skeleton", "rate", "mc", "verify"};
    if (std::find(known.begin(), known.end(), command) == known.end()) {
      throw ConfigError("unknown command '" + command + "'");
    }
    if (options.threads) {
      if (*options.threads < 1) throw ConfigError("--threads must be >= 1");
#ifdef _OPENMP
      omp_set_num_threads(*options.threads);
#endif
    }
    RunConfig cfg;
    if (!options.config.empty()) {
      cfg = load_run_config(options.config);
    } else if (command == "verify") {
      cfg = parse_run_config(Json::object());
    } else {
      throw ConfigError(command + ": --config is required");
    }
    if (options.seed) cfg.experiment.seed = *options.seed;
    if (options.suite) cfg.experiment.suite = *options.suite;
    if (options.tolerance_scale) {
      if (*options.tolerance_scale < 0.0) throw ConfigError("--tolerance-scale must be non-negative");
      cfg.experiment.tolerance_scale = *options.tolerance_scale;
    }
    writer.emplace(output_root(options.out, cfg), command, cfg.echo());
    result.run_id = writer->id();
    result.run_dir = writer->dir();
    if (command == "simulate") result.metrics = cmd_simulate(cfg, *writer, out, options.quiet);
    if (command == "skeleton") result.metrics = cmd_skeleton(cfg, *writer, out, options.quiet);
    if (command == "rate") result.metrics = cmd_rate(cfg, *writer, out, options.quiet);
    if (command == "mc") result.metrics = cmd_mc(cfg, *writer, out, options.quiet);
    if (command == "verify") result.metrics = cmd_verify(cfg, *writer, out, options.quiet);
    writer->finish(result.metrics, kOk, "ok");
    if (!options.quiet) out << "run " << result.run_id.substr(0, 16) << " -> " << result.run_dir.string() << "\n";
    return result;
  } catch (const ExitWith& e) {
    result.exit_code = e.code;
    err << "error: " << e.message << "\n";
    if (writer) writer->finish(result.metrics, e.code, e.message);
  } catch (const NumericalFailure& e) {
    result.exit_code = kNumericalFailure;
    err << "numerical failure: " << e.what() << "\n";
    if (writer) writer->finish(result.metrics, result.exit_code, e.what());
  } catch (const std::invalid_argument& e) {
    // ConfigError and CoverageError
    result.exit_code = kConfigError;
    err << "config error: " << e.what() << "\n";
    if (writer) writer->finish(result.metrics, result.exit_code, e.what());
  } catch (const nlohmann::json::exception& e) {
    result.exit_code = kConfigError;
    err << "config error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    result.exit_code = kUnexpected;
    err << "error: " << e.what() << "\n";
  }
  return result;
}

}  // namespace jumpns::app
