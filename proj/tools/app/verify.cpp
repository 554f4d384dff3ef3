#include "app/verify.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

#include "app/commands.hpp"
#include "app/oracles.hpp"
#include "jumpns/errors.hpp"
#include "jumpns/rng.hpp"

#ifndef JUMPNS_BENCHMARK_DIR
#define JUMPNS_BENCHMARK_DIR "configs"
#endif

namespace jumpns::app {

namespace fs = std::filesystem;

namespace {

struct Context {
  const VerifyOptions& opts;
  double tol(double t) const { return t * opts.tolerance_scale; }
  fs::path bench(const std::string& name) const {
    return (opts.benchmark_dir.empty() ? default_benchmark_dir() : opts.benchmark_dir) / name;
  }
};

using CheckFn = std::function<CheckResult(const Context&)>;

struct Check {
  CheckInfo info;
  CheckFn fn;
};

CheckResult le(double value, double limit, std::string detail = {}) {
  CheckResult r;
  r.value = value;
  r.limit = limit;
  r.passed = std::isfinite(value) && value <= limit;
  r.detail = std::move(detail);
  return r;
}

double rel_max_diff(const CoefficientPair& a, std::span<const Complex> bx, std::span<const Complex> by) {
  double scale = 0.0, err = 0.0;
  for (std::size_t i = 0; i < a.x.size(); ++i) {
    scale = std::max({scale, std::abs(a.x[i]), std::abs(a.y[i])});
    err = std::max({err, std::abs(a.x[i] - bx[i]), std::abs(a.y[i] - by[i])});
  }
  return scale > 0.0 ? err / scale : err;
}

// spectral -------------------------------------------------------------------

CheckResult bilinear_oracle(const Context& c) {
  const auto g = make_grid(8);
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto u = random_field(stream_seed(c.opts.seed + 100, 2 * s), g, 1.2, 1.0);
    const auto v = random_field(stream_seed(c.opts.seed + 100, 2 * s + 1), g, 1.2, 1.0);
    const auto b = bilinear(u, v);
    worst = std::max(worst, rel_max_diff(convolution_oracle(u, v), b.x(), b.y()));
  }
  return le(worst, c.tol(1e-10), "max relative deviation from direct convolution over 20 pairs, n = 8");
}

CheckResult bilinear_identities(const Context& c) {
  const auto g = make_grid(32);
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto u = random_field(stream_seed(c.opts.seed + 200, 3 * s), g, 1.5, 1.0);
    const auto v = random_field(stream_seed(c.opts.seed + 200, 3 * s + 1), g, 1.5, 1.0);
    const auto z = random_field(stream_seed(c.opts.seed + 200, 3 * s + 2), g, 1.5, 1.0);
    const auto nu = norms(u), nv = norms(v), nz = norms(z);
    const auto buv = bilinear(u, v);
    worst = std::max(worst, std::abs(inner_h(buv, v)) / (nu.v * nv.v * nv.v));
    worst = std::max(worst, std::abs(inner_h(buv, z) + inner_h(bilinear(u, z), v)) / (nu.v * nv.v * nz.v));
  }
  return le(worst, c.tol(1e-10), "max normalized |<B(u,v),v>| and |<B(u,v),z> + <B(u,z),v>| over 100 triples, n = 32");
}

CheckResult ladyzhenskaya(const Context& c) {
  const auto g = make_grid(32);
  double worst = 0.0;
  RandomStream rng(stream_seed(c.opts.seed + 300, 0));
  for (std::uint64_t s = 0; s < 100; ++s) {
    const double decay = 1.05 + 1.5 * rng.canonical();
    const double amp = std::exp(4.0 * rng.canonical() - 2.0);
    const auto u = random_field(stream_seed(c.opts.seed + 300, s + 1), g, decay, amp);
    const auto nt = norms(u);
    worst = std::max(worst, std::pow(l4_norm(u), 4) / (2.0 * nt.h * nt.h * nt.v * nt.v));
  }
  auto r = le(worst, 1.0 + c.tol(1e-6), "max |u|_L4^4 / (2 |u|_H^2 |u|_V^2) over 100 fields");
  return r;
}

CheckResult leray(const Context& c) {
  const auto g = make_grid(16);
  RandomStream rng(stream_seed(c.opts.seed + 400, 0));
  CoefficientPair raw{std::vector<Complex>(g.size()), std::vector<Complex>(g.size())};
  for (auto& z : raw.x) z = Complex(rng.normal(), rng.normal());
  for (auto& z : raw.y) z = Complex(rng.normal(), rng.normal());
  const auto p = leray_project(g, raw);
  const bool idem = leray_project(p) == p;
  auto r = le(p.max_divergence(), c.tol(1e-12), idem ? "projection idempotent" : "projection NOT idempotent");
  r.passed = r.passed && idem;
  return r;
}

CheckResult parseval(const Context& c) {
  const auto g = make_grid(32);
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto u = random_field(stream_seed(c.opts.seed + 500, s), g, 1.5, 1.0);
    worst = std::max(worst, std::abs(physical_h_norm(u) / norms(u).h - 1.0));
  }
  return le(worst, c.tol(1e-12), "relative gap between physical and spectral H norms");
}

// jump -----------------------------------------------------------------------

CheckResult prm_law(const Context& c) {
  const MarkSpace s({1.0, 0.5});
  const double a = 2.0, T = 1.0;
  const auto phi = ControlField::constant(T, 2, a, 2);
  const int N = 10000;
  double sum = 0.0, sum2 = 0.0;
  std::vector<double> counts(N);
  for (int i = 0; i < N; ++i) {
    counts[i] = static_cast<double>(thin(sample_base_prm(stream_seed(c.opts.seed + 600, i), T, s, a), phi, 1.0)
                                        .points.size());
    sum += counts[i];
  }
  const double mean = sum / N;
  for (double x : counts) sum2 += (x - mean) * (x - mean);
  const double var = sum2 / (N - 1);
  const double lambda = T * a * s.total_mass();
  const double z_mean = std::abs(mean - lambda) / std::sqrt(lambda / N);
  const double z_var = std::abs(var - lambda) / std::sqrt((lambda + 2.0 * lambda * lambda) / N);
  auto r = le(std::max(z_mean, z_var), c.tol(3.0), "largest standardized deviation of count mean / variance");
  r.data = {{"mean", mean}, {"variance", var}, {"poisson_parameter", lambda}};
  return r;
}

CheckResult girsanov_mean(const Context& c) {
  const MarkSpace s({1.0, 0.5});
  const auto phi = ControlField::uniform(1.0, 2, 2, {2.0, 0.5, 0.5, 2.0}, 2);
  const double eps = 0.5;
  const int N = 100000;
  double sum = 0.0;
  for (int i = 0; i < N; ++i) {
    const auto base = sample_base_prm(stream_seed(c.opts.seed + 700, i), 1.0, s, phi.bound_n() / eps);
    sum += std::exp(girsanov_log_weight(thin(base, phi, 1.0 / eps), phi, eps, s));
  }
  auto r = le(std::abs(sum / N - 1.0), c.tol(0.02), "|mean(M_T) - 1| over 1e5 samples, eps = 0.5");
  r.data = {{"mean", sum / N}};
  return r;
}

CheckResult entropy(const Context& c) {
  const MarkSpace unit({1.0});
  const double zero = entropy_LT(ControlField::unit(1.0, 1), unit);
  const auto two = ControlField::constant(1.0, 1, 2.0, 2);
  const double v = entropy_LT(two, unit);
  const double dev = std::max(std::abs(v - entropy_quadrature(two, unit, 1000)), std::abs(v - (2 * std::log(2.0) - 1)));
  auto r = le(dev, c.tol(1e-12), "L_T(2) against quadrature and 2 ln 2 - 1");
  r.passed = r.passed && zero == 0.0;
  r.data = {{"L_T_1", zero}, {"L_T_2", v}};
  return r;
}

CheckResult girsanov_consistency(const Context& c) {
  const MarkSpace s({1.0, 0.5});
  const auto phi = ControlField::uniform(1.0, 2, 2, {2.0, 0.5, 1.5, 0.75}, 2);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto base = sample_base_prm(stream_seed(c.opts.seed + 800, i), 1.0, s, 4.0);
    const double a = girsanov_log_weight(base, phi, 0.5, s);
    const double b = girsanov_log_weight(thin(base, phi, 2.0), phi, 0.5, s);
    worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(a)));
  }
  return le(worst, c.tol(1e-12), "log-weight from base sample vs thinned sample");
}

// spde -----------------------------------------------------------------------

NoiseCoefficient silent(const SpectralGrid& g, std::size_t m) {
  return {std::vector<double>(m, 0.0), VelocityField::zero(g), 0.0};
}

CheckResult single_mode_decay(const Context& c) {
  const auto g = make_grid(16);
  const auto u0 = VelocityField::single_mode(g, 1, 1, 1.0);
  SolverParams p;
  p.dt = 1e-4;
  p.horizon = 1.0;
  const auto tr = simulate(u0, p, silent(g, 1), MarkSpace({1.0}), c.opts.seed);
  const double h0 = norms(u0).h;
  double worst = 0.0;
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    worst = std::max(worst, std::abs(tr.norms[i].h / h0 - std::exp(-2.0 * tr.times[i])));
  }
  return le(worst, c.tol(1e-6), "max |h(t)/h(0) - exp(-|k|^2 t)|, dt = 1e-4, T = 1");
}

CheckResult energy_identity(const Context& c) {
  const auto g = make_grid(16);
  const auto u0 = random_field(stream_seed(c.opts.seed + 900, 0), g, 1.5, 1.0);
  SolverParams p;
  p.dt = 1e-3;
  p.horizon = 0.5;
  const auto tr = simulate(u0, p, silent(g, 1), MarkSpace({1.0}), c.opts.seed);
  const auto e = energy_diagnostic(tr);
  const double h0 = norms(u0).h, hT = tr.norms.back().h;
  return le(std::abs(hT * hT + 2.0 * e.int_v2 - h0 * h0) / (h0 * h0), c.tol(2e-3),
            "relative defect of |u(T)|^2 + 2 int |u|_V^2 = |u0|^2");
}

CheckResult zero_noise(const Context& c) {
  const auto g = make_grid(16);
  const auto u0 = random_field(stream_seed(c.opts.seed + 1000, 0), g, 1.5, 1.0);
  const MarkSpace s({1.0, 2.0});
  const NoiseCoefficient noise{{0.0, 0.0}, random_field(stream_seed(c.opts.seed + 1000, 1), g, 1.5, 1.0), 0.5};
  SolverParams p;
  p.dt = 1e-3;
  p.horizon = 0.2;
  p.eps = 0.1;
  const auto a = simulate(u0, p, noise, s, c.opts.seed);
  const auto b = solve_skeleton({u0, p, silent(g, 2), s, ControlField::unit(0.2, 2)});
  auto r = le(norms(*a.final_state - *b.final_state).h, 0.0, "silent noise vs deterministic solve (bitwise)");
  r.passed = *a.final_state == *b.final_state;
  return r;
}

CheckResult compensation_forms(const Context& c) {
  const auto g = make_grid(16);
  const auto u0 = random_field(stream_seed(c.opts.seed + 1100, 0), g, 1.5, 1.0);
  const MarkSpace s({1.0, 0.5});
  const NoiseCoefficient noise{{0.8, -0.4}, random_field(stream_seed(c.opts.seed + 1100, 1), g, 1.5, 0.5), 0.3};
  const auto phi = ControlField::uniform(0.2, 2, 2, {2.0, 0.5, 1.5, 0.75}, 2);
  SolverParams p;
  p.dt = 1e-3;
  p.horizon = 0.2;
  p.eps = 0.25;
  const auto a = simulate(u0, p, noise, s, c.opts.seed, &phi);
  p.compensation = CompensationForm::tilted_rate;
  const auto b = simulate(u0, p, noise, s, c.opts.seed, &phi);
  return le(norms(*a.final_state - *b.final_state).h / norms(*a.final_state).h, c.tol(1e-12),
            "relative gap between base-rate and tilted-rate compensator forms");
}

// skeleton -------------------------------------------------------------------

CheckResult unit_reduction(const Context& c) {
  const RunConfig cfg = load_run_config(c.bench("continuity.ini"));
  const SkeletonProblem p = build_problem(cfg);
  const auto a = solve_skeleton(p, ControlField::unit(p.params.horizon, p.space.size()));
  const auto b = simulate(p.u0, p.params, silent(p.u0.grid(), p.space.size()), p.space, c.opts.seed);
  auto r = le(norms(*a.final_state - *b.final_state).h, 0.0, "g = 1 skeleton vs noise-free stochastic run (bitwise)");
  r.passed = *a.final_state == *b.final_state && a.norms.size() == b.norms.size();
  return r;
}

CheckResult continuity(const Context& c) {
  const RunConfig cfg = load_run_config(c.bench("continuity.ini"));
  const SkeletonProblem p = build_problem(cfg);
  const Json& probe = cfg.experiment.probe;
  const auto h = probe.at("direction").at("values").get<std::vector<double>>();
  const std::size_t intervals = probe.at("direction").value("intervals", 1);
  const auto ns = probe.at("n").get<std::vector<int>>();
  std::vector<ControlField> seq;
  for (int n : ns) {
    std::vector<double> v(h.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 + h[i] / n;
    seq.push_back(ControlField::uniform(p.params.horizon, intervals, p.space.size(), v, ControlField::required_bound(v)));
  }
  const auto d = skeleton_continuity_probe(seq, ControlField::unit(p.params.horizon, p.space.size()), p);
  bool decreasing = true;
  for (std::size_t i = 1; i < d.size(); ++i) decreasing = decreasing && d[i] < d[i - 1];
  auto r = le(d.back(), c.tol(1e-6), decreasing ? "d_n strictly decreasing" : "d_n NOT strictly decreasing");
  r.passed = r.passed && decreasing;
  r.data = {{"n", ns}, {"d_n", d}};
  return r;
}

// ldp ------------------------------------------------------------------------

CheckResult zero_rate(const Context& c) {
  const RunConfig cfg = load_run_config(c.bench("ldp_scaling.ini"));
  const SkeletonProblem p = build_problem(cfg);
  const auto base = solve_skeleton(p);
  const double h = base.norms.back().h;
  const EventFunctional ev{EventKind::terminal_energy_above, h * h - 1e-3, {}};
  const auto rate = minimize_rate(ev, p, cfg.experiment.parameterization, cfg.experiment.optimizer, c.opts.seed);
  auto r = le(rate.rate_value, 0.0, "event containing the g = 1 path");
  r.passed = r.passed && rate.feasible && rate.control.is_unit();
  return r;
}

CheckResult planted(const Context& c) {
  const RunConfig cfg = load_run_config(c.bench("planted.ini"));
  const SkeletonProblem p = build_problem(cfg);
  const EventFunctional ev = build_event(cfg, p);
  const ControlField star = build_control(cfg.experiment.planted, p.params.horizon, p.space.size(), cfg.base_dir,
                                          "experiment.planted");
  const double lt_star = entropy_LT(star, p.space);
  const auto rate = minimize_rate(ev, p, cfg.experiment.parameterization, cfg.experiment.optimizer,
                                  stream_seed(cfg.experiment.seed, 0));
  const bool sound = std::abs(entropy_LT(rate.control, p.space) - rate.rate_value) <= 1e-12 &&
                     ev.contains(solve_skeleton(p, rate.control));
  auto r = le(rate.rate_value - lt_star, c.tol(1e-3), "rate_value - L_T(g*)");
  r.passed = r.passed && rate.feasible && sound && rate.constraint_residual <= c.tol(1e-4);
  std::ostringstream os;
  os << "rate_value - L_T(g*); residual " << rate.constraint_residual << (sound ? ", sound" : ", NOT sound");
  r.detail = os.str();
  r.data = {{"rate_value", rate.rate_value}, {"planted_LT", lt_star}, {"residual", rate.constraint_residual}};
  return r;
}

CheckResult scaling(const Context& c) {
  const RunConfig cfg = load_run_config(c.bench("ldp_scaling.ini"));
  const SkeletonProblem p = build_problem(cfg);
  const EventFunctional ev = build_event(cfg, p);
  const auto& ex = cfg.experiment;
  const auto rate = minimize_rate(ev, p, ex.parameterization, ex.optimizer, stream_seed(ex.seed, 0));
  if (!rate.feasible) {
    auto r = le(INFINITY, 0.0, "no feasible control: " + rate.message);
    return r;
  }
  const auto t = ldp_scaling_table(ev, ex.eps_grid, ex.budgets, rate, p,
                                   {ex.min_hits, c.tol(ex.band), stream_seed(ex.seed, 1)});
  Json rows = Json::array();
  for (const auto& row : t.rows) {
    rows.push_back({{"eps", row.eps}, {"p_hat", row.p_hat}, {"neg_eps_log_p", row.neg_eps_log_p}, {"hits", row.hits}});
  }
  auto r = le(t.checked_row ? t.relative_gap : INFINITY, c.tol(ex.band),
              std::string("|-eps log p - rate| / rate at the smallest eps with enough hits; estimators ") +
                  (t.estimators_agree ? "agree" : "DISAGREE") + ", trend " + (t.monotone ? "monotone" : "NOT monotone"));
  r.passed = r.passed && t.within_band && t.estimators_agree && t.monotone;
  r.data = {{"rate_value", rate.rate_value}, {"rows", rows}};
  return r;
}

CheckResult apriori(const Context& c) {
  const RunConfig cfg = load_run_config(c.bench("apriori.ini"));
  const SkeletonProblem p = build_problem(cfg);
  const auto& ex = cfg.experiment;
  const bool tilted = !p.g.is_unit();
  const double skeleton_value = solve_skeleton(p).upsilon_h.back();
  std::vector<double> means;
  double first = 0.0, bound_excess = -INFINITY;
  std::size_t guard_hits = 0;
  Json rows = Json::array();
  for (std::size_t i = 0; i < ex.eps_grid.size(); ++i) {
    const auto s = ensemble_upsilon(p, ex.eps_grid[i], ex.n_traj, stream_seed(ex.seed, i), tilted ? &p.g : nullptr);
    guard_hits += s.guard_hits;
    if (i == 0) first = s.mean;
    // Allowed level: 25% above the larger of the coarsest-eps mean and the eps -> 0 limit.
    const double allowed = (1.0 + c.tol(0.25)) * std::max(first, skeleton_value) + 3.0 * s.std_error;
    bound_excess = std::max(bound_excess, s.mean / allowed - 1.0);
    means.push_back(s.mean);
    rows.push_back({{"eps", ex.eps_grid[i]}, {"mean", s.mean}, {"std_error", s.std_error}, {"guard_hits", s.guard_hits}});
  }
  auto r = le(bound_excess, 0.0, "ensemble mean of sup|X|_H^2 + int |X|_V^2 relative to the allowed level");
  r.passed = r.passed && guard_hits == 0;
  double cn = 0.0;
  for (double m : means) cn = std::max(cn, m);
  r.data = {{"rows", rows}, {"skeleton_value", skeleton_value}, {"empirical_C_N", cn}};
  return r;
}

CheckResult unit_tilt(const Context& c) {
  const RunConfig cfg = load_run_config(c.bench("ldp_scaling.ini"));
  const SkeletonProblem p = build_problem(cfg);
  const EventFunctional ev{EventKind::terminal_energy_above, 0.5, {}};
  const auto plain = mc_probability(ev, 0.5, 500, c.opts.seed, p);
  std::vector<double> w;
  const auto is = importance_sampled_probability(ev, 0.5, ControlField::unit(p.params.horizon, p.space.size()), 500,
                                                 c.opts.seed, p, &w);
  bool unit = true;
  for (double x : w) unit = unit && x == 1.0;
  auto r = le(std::abs(plain.p_hat - is.p_hat), 0.0, "unit tilt vs plain Monte Carlo");
  r.passed = r.passed && unit && plain.hits == is.hits;
  return r;
}

CheckResult threshold_monotone(const Context& c) {
  const RunConfig cfg = load_run_config(c.bench("ldp_scaling.ini"));
  const SkeletonProblem p = build_problem(cfg);
  RateParameterization param = cfg.experiment.parameterization;
  param.intervals = 2;
  const auto low = minimize_rate({EventKind::terminal_energy_above, 1.2, {}}, p, param, cfg.experiment.optimizer,
                                 c.opts.seed);
  const auto high = minimize_rate({EventKind::terminal_energy_above, 1.44, {}}, p, param, cfg.experiment.optimizer,
                                  c.opts.seed, &low.control);
  auto r = le(low.rate_value - high.rate_value, c.tol(1e-3), "rate(threshold 1.2) - rate(threshold 1.44)");
  r.passed = r.passed && low.feasible && high.feasible;
  r.data = {{"rate_low", low.rate_value}, {"rate_high", high.rate_value}};
  return r;
}

// cli ------------------------------------------------------------------------

CheckResult config_roundtrip(const Context& c) {
  std::size_t checked = 0, mismatched = 0;
  for (const auto& entry : fs::directory_iterator(c.bench(""))) {
    if (entry.path().extension() != ".ini") continue;
    const RunConfig a = load_run_config(entry.path());
    const RunConfig b = parse_run_config(a.echo(), a.base_dir);
    ++checked;
    if (a.echo() != b.echo()) ++mismatched;
  }
  auto r = le(static_cast<double>(mismatched), 0.0, std::to_string(checked) + " configs re-parsed from their echo");
  r.passed = r.passed && checked > 0;
  return r;
}

Json manifest_of(const fs::path& run_dir) {
  std::ifstream is(run_dir / "record.json");
  return Json::parse(is).at("manifest");
}

CheckResult determinism(const Context& c) {
  const fs::path root = fs::temp_directory_path() / ("jumpns-verify-" + std::to_string(::getpid()));
  const std::vector<std::pair<std::string, std::string>> runs{{"simulate", "simulate_minimal.ini"},
                                                               {"skeleton", "skeleton_unit.ini"},
                                                               {"rate", "zero_rate.ini"},
                                                               {"mc", "mc_small.ini"},
                                                               {"verify", "verify_small.ini"}};
  std::size_t differing = 0;
  std::string detail;
  for (const auto& [cmd, file] : runs) {
    std::array<Json, 2> manifests;
    for (int k = 0; k < 2; ++k) {
      GlobalOptions o;
      o.config = c.bench(file).string();
      o.out = (root / std::to_string(k)).string();
      o.quiet = true;
      std::ostringstream out, err;
      const auto res = run_command(cmd, o, out, err);
      if (res.exit_code != kOk) throw NumericalFailure(cmd + " exited with " + std::to_string(res.exit_code) + ": " + err.str());
      manifests[k] = manifest_of(res.run_dir);
    }
    if (manifests[0] != manifests[1] || manifests[0].empty()) {
      ++differing;
      detail += cmd + " ";
    }
  }
  std::error_code ec;
  fs::remove_all(root, ec);
  return le(static_cast<double>(differing), 0.0,
            differing ? "output hashes differ for: " + detail : "simulate, skeleton, rate, mc, verify rerun identically");
}

const std::vector<Check>& registry() {
  static const std::vector<Check> checks{
      {{"spectral.bilinear_oracle", "spectral", "pseudospectral B matches direct convolution at n = 8"}, bilinear_oracle},
      {{"spectral.bilinear_identities", "spectral", "antisymmetry of B over 100 random triples"}, bilinear_identities},
      {{"spectral.ladyzhenskaya", "spectral", "Ladyzhenskaya inequality with constant 2"}, ladyzhenskaya},
      {{"spectral.leray", "spectral", "Leray projection solenoidal and idempotent"}, leray},
      {{"spectral.parseval", "spectral", "spectral and physical H norms agree"}, parseval},
      {{"jump.prm_law", "jump", "thinned counts are Poisson(T a nu(Z))"}, prm_law},
      {{"jump.girsanov_mean", "jump", "Girsanov weight has mean one"}, girsanov_mean},
      {{"jump.entropy", "jump", "entropy functional reference values"}, entropy},
      {{"jump.girsanov_consistency", "jump", "log-weight from base and thinned samples agree"}, girsanov_consistency},
      {{"spde.single_mode_decay", "spde", "single mode decays as exp(-|k|^2 t)"}, single_mode_decay},
      {{"spde.energy_identity", "spde", "energy identity for the unforced flow"}, energy_identity},
      {{"spde.zero_noise", "spde", "silent noise reproduces the deterministic solve"}, zero_noise},
      {{"spde.compensation_forms", "spde", "both compensator forms give the same path"}, compensation_forms},
      {{"skeleton.unit_reduction", "skeleton", "g = 1 skeleton equals the noise-free run"}, unit_reduction},
      {{"skeleton.continuity", "skeleton", "continuity probe d_n decreases below 1e-6"}, continuity},
      {{"ldp.zero_rate", "ldp", "events containing the g = 1 path have rate 0"}, zero_rate},
      {{"ldp.planted", "ldp", "planted control bounds the optimizer's rate"}, planted},
      {{"ldp.threshold_monotone", "ldp", "raising the threshold never lowers the rate"}, threshold_monotone},
      {{"ldp.unit_tilt", "ldp", "unit tilt reproduces plain Monte Carlo"}, unit_tilt},
      {{"ldp.scaling", "ldp", "-eps log p within the band of the variational rate"}, scaling},
      {{"ldp.apriori", "ldp", "ensemble a-priori functional stays bounded as eps decreases"}, apriori},
      {{"cli.config_roundtrip", "cli", "config echo re-parses to the same structure"}, config_roundtrip},
      {{"cli.determinism", "cli", "every command reruns with identical output hashes"}, determinism},
  };
  return checks;
}

}  // namespace

Json CheckResult::to_json() const {
  Json j{{"id", id},
         {"module", module},
         {"description", description},
         {"passed", passed},
         {"value", std::isfinite(value) ? Json(value) : Json(nullptr)},
         {"limit", limit},
         {"detail", detail}};
  if (!data.is_null()) j["data"] = data;
  return j;
}

fs::path default_benchmark_dir() { return JUMPNS_BENCHMARK_DIR; }

std::vector<CheckInfo> list_checks() {
  std::vector<CheckInfo> out;
  for (const auto& c : registry()) out.push_back(c.info);
  return out;
}

bool selector_matches(const std::string& suite, const CheckInfo& check) {
  std::stringstream ss(suite);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "all" || item == check.module || item == check.id) return true;
  }
  return false;
}

CheckResult run_check(const std::string& id, const VerifyOptions& options) {
  for (const auto& c : registry()) {
    if (c.info.id != id) continue;
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r;
    try {
      r = c.fn(Context{options});
    } catch (const std::exception& e) {
      r = CheckResult{};
      r.passed = false;
      r.value = INFINITY;
      r.detail = std::string("exception: ") + e.what();
    }
    r.id = c.info.id;
    r.module = c.info.module;
    r.description = c.info.description;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  }
  throw ConfigError("unknown check '" + id + "'");
}

std::vector<CheckResult> run_verify(const VerifyOptions& options, std::ostream* progress) {
  std::vector<CheckResult> out;
  for (const auto& c : registry()) {
    if (!selector_matches(options.suite, c.info)) continue;
    out.push_back(run_check(c.info.id, options));
    if (progress) {
      const auto& r = out.back();
      *progress << (r.passed ? "PASS " : "FAIL ") << r.id << "  value=" << r.value << " limit=" << r.limit << "  ("
                << r.seconds << " s)\n";
    }
  }
  return out;
}

}  // namespace jumpns::app
