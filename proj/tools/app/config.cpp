#include "app/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "jumpns/errors.hpp"
#include "jumpns/field_io.hpp"

namespace jumpns::app {

namespace fs = std::filesystem;

Json parse_ini_text(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream is(text);
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  Json out = Json::object();
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config: key '" + section + "' outside any [section]");
    Json sec = Json::object();
    for (const auto& [key, node] : body) {
      if (!node.empty()) throw ConfigError("config: nested keys are not supported ('" + key + "')");
      const std::string raw = node.data();
      Json value = Json::parse(raw, nullptr, false);
      if (value.is_discarded()) value = raw;
      sec[key] = std::move(value);
    }
    out[section] = std::move(sec);
  }
  return out;
}

Json read_config_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  const std::string text = ss.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    Json j = Json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config '" + path.string() + "' is not valid JSON");
    return j;
  }
  return parse_ini_text(text);
}

namespace {

/// Reads keys out of one JSON object and remembers which were used, so that
/// leftovers can be reported as unknown.
class Reader {
 public:
  Reader(const Json& j, std::string name) : name_(std::move(name)) {
    if (j.is_null()) {
      obj_ = Json::object();
    } else if (j.is_object()) {
      obj_ = j;
    } else {
      throw ConfigError(name_ + ": expected a table of keys");
    }
  }

  std::string field(const std::string& key) const { return name_ + "." + key; }

  const Json* find(const std::string& key) {
    used_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  double number(const std::string& key, double def) {
    const Json* v = find(key);
    if (!v) return def;
    if (!v->is_number()) throw ConfigError(field(key) + ": expected a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) throw ConfigError(field(key) + ": must be finite");
    return x;
  }

  std::optional<double> optional_number(const std::string& key) {
    if (!find(key)) return std::nullopt;
    return number(key, 0.0);
  }

  std::int64_t integer(const std::string& key, std::int64_t def) {
    const Json* v = find(key);
    if (!v) return def;
    if (!v->is_number_integer()) throw ConfigError(field(key) + ": expected an integer");
    return v->get<std::int64_t>();
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t def) {
    const Json* v = find(key);
    if (!v) return def;
    if (v->is_number_unsigned()) return v->get<std::uint64_t>();
    if (v->is_number_integer() && v->get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v->get<std::int64_t>());
    throw ConfigError(field(key) + ": expected a non-negative integer");
  }

  bool boolean(const std::string& key, bool def) {
    const Json* v = find(key);
    if (!v) return def;
    if (!v->is_boolean()) throw ConfigError(field(key) + ": expected true or false");
    return v->get<bool>();
  }

  std::string string(const std::string& key, const std::string& def) {
    const Json* v = find(key);
    if (!v) return def;
    if (!v->is_string()) throw ConfigError(field(key) + ": expected a string");
    return v->get<std::string>();
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> def) {
    const Json* v = find(key);
    if (!v) return def;
    if (!v->is_array()) throw ConfigError(field(key) + ": expected a list of numbers");
    std::vector<double> out;
    for (const auto& x : *v) {
      if (!x.is_number()) throw ConfigError(field(key) + ": expected a list of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  std::vector<std::string> strings(const std::string& key) {
    const Json* v = find(key);
    if (!v) return {};
    if (!v->is_array()) throw ConfigError(field(key) + ": expected a list of strings");
    std::vector<std::string> out;
    for (const auto& x : *v) {
      if (!x.is_string()) throw ConfigError(field(key) + ": expected a list of strings");
      out.push_back(x.get<std::string>());
    }
    return out;
  }

  Json raw(const std::string& key, Json def = nullptr) {
    const Json* v = find(key);
    return v ? *v : def;
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!used_.count(key)) throw ConfigError(name_ + "." + key + ": unknown key");
    }
  }

 private:
  std::string name_;
  Json obj_;
  std::set<std::string> used_;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

StokesScheme scheme_from(const std::string& s) {
  if (s == "exponential") return StokesScheme::exponential;
  if (s == "implicit_euler") return StokesScheme::implicit_euler;
  throw ConfigError("solver.scheme: expected exponential or implicit_euler");
}

CompensationForm compensation_from(const std::string& s) {
  if (s == "base_rate") return CompensationForm::base_rate;
  if (s == "tilted_rate") return CompensationForm::tilted_rate;
  throw ConfigError("solver.compensation: expected base_rate or tilted_rate");
}

Json optimizer_echo(const OptimizerConfig& o) {
  return Json{{"max_evals", o.simplex.max_evals},     {"initial_step", o.simplex.initial_step},
              {"ftol", o.simplex.ftol},               {"xtol", o.simplex.xtol},
              {"restarts", o.restarts},               {"restart_spread", o.restart_spread},
              {"penalty_start", o.penalty_start},     {"penalty_factor", o.penalty_factor},
              {"penalty_levels", o.penalty_levels},   {"residual_tol", o.residual_tol}};
}

}  // namespace

std::string to_string(StokesScheme s) { return s == StokesScheme::exponential ? "exponential" : "implicit_euler"; }
std::string to_string(CompensationForm f) { return f == CompensationForm::base_rate ? "base_rate" : "tilted_rate"; }

RunConfig parse_run_config(const Json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config: expected sections");
  static const std::set<std::string> sections{"grid", "noise", "solver", "experiment", "output"};
  for (const auto& [name, value] : j.items()) {
    if (!sections.count(name)) throw ConfigError("config: unknown section [" + name + "]");
  }
  auto section = [&](const char* name) { return j.contains(name) ? j.at(name) : Json(nullptr); };

  RunConfig c;
  c.base_dir = base_dir;

  Reader grid(section("grid"), "grid");
  const auto n = grid.integer("n_modes", c.grid.n_modes);
  require(n >= 8 && n % 2 == 0 && n <= 1024, "grid.n_modes must be an even integer in [8, 1024]");
  c.grid.n_modes = static_cast<int>(n);
  c.grid.domain_length = grid.number("domain_length", c.grid.domain_length);
  require(c.grid.domain_length > 0.0, "grid.domain_length must be positive");
  grid.finish();

  Reader noise(section("noise"), "noise");
  c.noise.weights = noise.numbers("weights", c.noise.weights);
  require(!c.noise.weights.empty(), "noise.weights must list at least one mark");
  for (double w : c.noise.weights) require(w > 0.0, "noise.weights must be positive");
  c.noise.sigma = noise.numbers("sigma", std::vector<double>(c.noise.weights.size(), 0.0));
  require(c.noise.sigma.size() == c.noise.weights.size(), "noise.sigma must have one entry per mark");
  c.noise.marks = noise.strings("marks");
  require(c.noise.marks.empty() || c.noise.marks.size() == c.noise.weights.size(),
          "noise.marks must have one label per weight");
  c.noise.base_field = noise.raw("base_field", c.noise.base_field);
  c.noise.linear_gain = noise.number("linear_gain", 0.0);
  noise.finish();

  Reader solver(section("solver"), "solver");
  c.solver.dt = solver.number("dt", c.solver.dt);
  require(c.solver.dt > 0.0, "solver.dt must be positive");
  c.solver.T = solver.number("T", c.solver.T);
  require(c.solver.T > 0.0, "solver.T must be positive");
  c.solver.eps = solver.number("eps", c.solver.eps);
  require(c.solver.eps > 0.0, "solver.eps must be positive");
  c.solver.viscosity = solver.number("viscosity", c.solver.viscosity);
  require(c.solver.viscosity > 0.0, "solver.viscosity must be positive");
  c.solver.cutoff_m = solver.optional_number("cutoff_m");
  require(!c.solver.cutoff_m || *c.solver.cutoff_m >= 0.0, "solver.cutoff_m must be non-negative");
  c.solver.guard = solver.optional_number("guard");
  require(!c.solver.guard || *c.solver.guard > 0.0, "solver.guard must be positive");
  c.solver.initial = solver.raw("initial", c.solver.initial);
  c.solver.forcing = solver.raw("forcing", c.solver.forcing);
  c.solver.scheme = scheme_from(solver.string("scheme", "exponential"));
  c.solver.compensation = compensation_from(solver.string("compensation", "base_rate"));
  c.solver.nonlinear = solver.boolean("nonlinear", true);
  solver.finish();
  {
    SolverParams probe;
    probe.dt = c.solver.dt;
    probe.horizon = c.solver.T;
    probe.steps();
  }

  Reader ex(section("experiment"), "experiment");
  auto& e = c.experiment;
  e.seed = ex.unsigned_integer("seed", e.seed);
  e.n_traj = ex.unsigned_integer("n_traj", e.n_traj);
  require(e.n_traj >= 1, "experiment.n_traj must be >= 1");
  e.control = ex.raw("control");
  e.probe = ex.raw("probe");
  e.event = ex.raw("event");
  e.planted = ex.raw("planted");
  e.tilt = ex.raw("tilt");
  {
    Reader p(ex.raw("parameterization"), "experiment.parameterization");
    const auto intervals = p.integer("intervals", static_cast<std::int64_t>(e.parameterization.intervals));
    require(intervals >= 1, "experiment.parameterization.intervals must be >= 1");
    e.parameterization.intervals = static_cast<std::size_t>(intervals);
    const auto bound = p.integer("bound_n", e.parameterization.bound_n);
    require(bound >= 1 && bound <= 1000000, "experiment.parameterization.bound_n must be >= 1");
    e.parameterization.bound_n = static_cast<int>(bound);
    p.finish();
    require(e.parameterization.dimension(c.noise.weights.size()) <= 64,
            "experiment.parameterization: at most 64 decision variables");
  }
  {
    Reader o(ex.raw("optimizer"), "experiment.optimizer");
    auto& opt = e.optimizer;
    opt.simplex.max_evals = static_cast<int>(o.integer("max_evals", opt.simplex.max_evals));
    opt.simplex.initial_step = o.number("initial_step", opt.simplex.initial_step);
    opt.simplex.ftol = o.number("ftol", opt.simplex.ftol);
    opt.simplex.xtol = o.number("xtol", opt.simplex.xtol);
    opt.restarts = static_cast<int>(o.integer("restarts", opt.restarts));
    opt.restart_spread = o.number("restart_spread", opt.restart_spread);
    opt.penalty_start = o.number("penalty_start", opt.penalty_start);
    opt.penalty_factor = o.number("penalty_factor", opt.penalty_factor);
    opt.penalty_levels = static_cast<int>(o.integer("penalty_levels", opt.penalty_levels));
    opt.residual_tol = o.number("residual_tol", opt.residual_tol);
    o.finish();
    require(opt.simplex.max_evals >= 1, "experiment.optimizer.max_evals must be >= 1");
    require(opt.simplex.initial_step > 0.0, "experiment.optimizer.initial_step must be positive");
    require(opt.restarts >= 0, "experiment.optimizer.restarts must be >= 0");
    require(opt.penalty_start > 0.0 && opt.penalty_factor > 1.0,
            "experiment.optimizer: penalty_start > 0 and penalty_factor > 1 required");
    require(opt.penalty_levels >= 1, "experiment.optimizer.penalty_levels must be >= 1");
    require(opt.residual_tol > 0.0, "experiment.optimizer.residual_tol must be positive");
  }
  e.eps_grid = ex.numbers("eps_grid", {});
  for (std::size_t i = 0; i < e.eps_grid.size(); ++i) {
    require(e.eps_grid[i] > 0.0, "experiment.eps_grid values must be positive");
    require(i == 0 || e.eps_grid[i] < e.eps_grid[i - 1], "experiment.eps_grid must be decreasing");
  }
  {
    const Json budgets = ex.raw("budgets", Json::array());
    require(budgets.is_array(), "experiment.budgets: expected a list of {plain, tilted}");
    for (std::size_t i = 0; i < budgets.size(); ++i) {
      Reader b(budgets[i], "experiment.budgets[" + std::to_string(i) + "]");
      ScalingBudget sb;
      sb.plain = b.unsigned_integer("plain", 0);
      sb.tilted = b.unsigned_integer("tilted", 0);
      b.finish();
      e.budgets.push_back(sb);
    }
    require(e.budgets.empty() || e.budgets.size() == e.eps_grid.size(),
            "experiment.budgets must have one entry per eps_grid value");
  }
  e.min_hits = ex.unsigned_integer("min_hits", e.min_hits);
  e.band = ex.number("band", e.band);
  require(e.band > 0.0, "experiment.band must be positive");
  e.n_samples = ex.unsigned_integer("n_samples", e.n_samples);
  e.suite = ex.string("suite", e.suite);
  e.tolerance_scale = ex.number("tolerance_scale", e.tolerance_scale);
  require(e.tolerance_scale >= 0.0, "experiment.tolerance_scale must be non-negative");
  e.benchmark_dir = ex.string("benchmark_dir", "");
  ex.finish();

  Reader out(section("output"), "output");
  c.output.directory = out.string("directory", "");
  c.output.snapshot_stride = out.unsigned_integer("snapshot_stride", 0);
  out.finish();
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  return parse_run_config(read_config_file(path), fs::absolute(path).parent_path());
}

Json RunConfig::echo() const {
  Json j;
  j["grid"] = {{"n_modes", grid.n_modes}, {"domain_length", grid.domain_length}};
  Json nz;
  if (!noise.marks.empty()) nz["marks"] = noise.marks;
  nz["weights"] = noise.weights;
  nz["sigma"] = noise.sigma;
  nz["base_field"] = noise.base_field;
  nz["linear_gain"] = noise.linear_gain;
  j["noise"] = nz;
  Json s;
  s["dt"] = solver.dt;
  s["T"] = solver.T;
  s["eps"] = solver.eps;
  s["viscosity"] = solver.viscosity;
  if (solver.cutoff_m) s["cutoff_m"] = *solver.cutoff_m;
  if (solver.guard) s["guard"] = *solver.guard;
  s["initial"] = solver.initial;
  s["forcing"] = solver.forcing;
  s["scheme"] = to_string(solver.scheme);
  s["compensation"] = to_string(solver.compensation);
  s["nonlinear"] = solver.nonlinear;
  j["solver"] = s;
  const auto& e = experiment;
  Json x;
  x["seed"] = e.seed;
  x["n_traj"] = e.n_traj;
  if (!e.control.is_null()) x["control"] = e.control;
  if (!e.probe.is_null()) x["probe"] = e.probe;
  if (!e.event.is_null()) x["event"] = e.event;
  if (!e.planted.is_null()) x["planted"] = e.planted;
  if (!e.tilt.is_null()) x["tilt"] = e.tilt;
  x["parameterization"] = {{"intervals", e.parameterization.intervals}, {"bound_n", e.parameterization.bound_n}};
  x["optimizer"] = optimizer_echo(e.optimizer);
  x["eps_grid"] = e.eps_grid;
  Json budgets = Json::array();
  for (const auto& b : e.budgets) budgets.push_back({{"plain", b.plain}, {"tilted", b.tilted}});
  x["budgets"] = budgets;
  x["min_hits"] = e.min_hits;
  x["band"] = e.band;
  x["n_samples"] = e.n_samples;
  x["suite"] = e.suite;
  x["tolerance_scale"] = e.tolerance_scale;
  if (!e.benchmark_dir.empty()) x["benchmark_dir"] = e.benchmark_dir;
  j["experiment"] = x;
  Json o;
  if (!output.directory.empty()) o["directory"] = output.directory;
  o["snapshot_stride"] = output.snapshot_stride;
  j["output"] = o;
  return j;
}

// ---------------------------------------------------------------------------

SpectralGrid build_grid(const RunConfig& c) { return SpectralGrid::make(c.grid.n_modes, c.grid.domain_length); }

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path q(p);
  return q.is_absolute() || base.empty() ? q : base / q;
}

}  // namespace

VelocityField build_field(const Json& spec, const SpectralGrid& grid, const fs::path& base_dir,
                          const std::string& where) {
  if (spec.is_null()) return VelocityField::zero(grid);
  if (spec.is_string()) {
    if (spec.get<std::string>() == "zero") return VelocityField::zero(grid);
    return build_field(Json{{"kind", "file"}, {"path", spec}}, grid, base_dir, where);
  }
  Reader r(spec, where);
  const std::string kind = r.string("kind", "");
  VelocityField out = VelocityField::zero(grid);
  if (kind == "zero") {
  } else if (kind == "mode") {
    const auto k = r.numbers("k", {});
    require(k.size() == 2 && k[0] == std::round(k[0]) && k[1] == std::round(k[1]) && (k[0] != 0 || k[1] != 0),
            where + ".k: expected two integers, not both zero");
    const int kx = static_cast<int>(k[0]), ky = static_cast<int>(k[1]);
    require(std::abs(kx) < grid.n() / 2 && std::abs(ky) < grid.n() / 2, where + ".k: outside the resolved band");
    const auto amplitude = r.optional_number("amplitude");
    const auto norm_h = r.optional_number("norm_h");
    require(!(amplitude && norm_h), where + ": give amplitude or norm_h, not both");
    out = VelocityField::single_mode(grid, kx, ky, amplitude.value_or(1.0));
    if (norm_h) out *= *norm_h / norms(out).h;
  } else if (kind == "random") {
    const auto seed = r.unsigned_integer("seed", 0);
    const double decay = r.number("decay", 1.5);
    require(decay > 1.0, where + ".decay must exceed 1");
    const double amplitude = r.number("amplitude", 1.0);
    out = random_field(seed, grid, decay, amplitude);
  } else if (kind == "file") {
    const std::string path = r.string("path", "");
    require(!path.empty(), where + ".path is required");
    out = load_field(resolve(base_dir, path).string());
    require(out.grid() == grid, where + ": field file grid does not match [grid]");
  } else {
    throw ConfigError(where + ".kind: expected zero, mode, random or file");
  }
  r.finish();
  return out;
}

ControlField build_control(const Json& spec, double horizon, std::size_t marks, const fs::path& base_dir,
                           const std::string& where) {
  ControlField g = ControlField::unit(horizon, marks);
  if (spec.is_null()) return g;
  if (spec.is_string()) {
    g = load_control(resolve(base_dir, spec.get<std::string>()).string());
  } else if (spec.is_object() && spec.contains("breakpoints")) {
    g = control_from_json(spec.dump());
  } else {
    Reader r(spec, where);
    const std::string kind = r.string("kind", "");
    if (kind == "unit") {
    } else if (kind == "constant") {
      const double v = r.number("value", 1.0);
      require(v > 0.0, where + ".value must be positive");
      g = ControlField::constant(horizon, marks, v, ControlField::required_bound({v}));
    } else if (kind == "uniform") {
      const auto intervals = r.integer("intervals", 1);
      require(intervals >= 1, where + ".intervals must be >= 1");
      const auto values = r.numbers("values", {});
      require(values.size() == static_cast<std::size_t>(intervals) * marks,
              where + ".values: expected intervals * marks entries");
      for (double v : values) require(v > 0.0, where + ".values must be positive");
      g = ControlField::uniform(horizon, static_cast<std::size_t>(intervals), marks, values,
                                ControlField::required_bound(values));
    } else {
      throw ConfigError(where + ".kind: expected unit, constant, uniform, a path or an inline control");
    }
    r.finish();
  }
  require(g.marks() == marks, where + ": control has " + std::to_string(g.marks()) + " marks, noise has " +
                                  std::to_string(marks));
  require(std::abs(g.horizon() - horizon) <= 1e-12 * horizon, where + ": control horizon differs from solver.T");
  return g;
}

MarkSpace build_marks(const RunConfig& c) {
  if (c.noise.marks.empty()) return MarkSpace(c.noise.weights);
  return MarkSpace(c.noise.marks, c.noise.weights);
}

NoiseCoefficient build_noise(const RunConfig& c, const SpectralGrid& grid) {
  return {c.noise.sigma, build_field(c.noise.base_field, grid, c.base_dir, "noise.base_field"), c.noise.linear_gain};
}

SolverParams build_params(const RunConfig& c, const SpectralGrid& grid) {
  SolverParams p;
  p.dt = c.solver.dt;
  p.horizon = c.solver.T;
  p.eps = c.solver.eps;
  p.viscosity = c.solver.viscosity;
  p.cutoff_m = c.solver.cutoff_m;
  p.guard = c.solver.guard;
  p.scheme = c.solver.scheme;
  p.compensation = c.solver.compensation;
  p.nonlinear = c.solver.nonlinear;
  p.snapshot_stride = c.output.snapshot_stride;
  VelocityField f = build_field(c.solver.forcing, grid, c.base_dir, "solver.forcing");
  if (norms(f).h > 0.0) p.forcing = Forcing::constant(std::move(f));
  return p;
}

SkeletonProblem build_problem(const RunConfig& c) {
  const SpectralGrid grid = build_grid(c);
  MarkSpace space = build_marks(c);
  const std::size_t marks = space.size();
  return {build_field(c.solver.initial, grid, c.base_dir, "solver.initial"), build_params(c, grid),
          build_noise(c, grid), std::move(space),
          build_control(c.experiment.control, c.solver.T, marks, c.base_dir, "experiment.control")};
}

EventFunctional build_event(const RunConfig& c, const SkeletonProblem& problem) {
  if (c.experiment.event.is_null()) throw ConfigError("experiment.event is required for this command");
  Reader r(c.experiment.event, "experiment.event");
  EventFunctional ev;
  ev.kind = event_kind_from_string(r.string("kind", ""));
  const auto threshold = r.optional_number("threshold");
  const auto fraction = r.optional_number("threshold_fraction");
  const Json reference = r.raw("reference");
  r.finish();
  require(threshold.has_value() != fraction.has_value(),
          "experiment.event: give exactly one of threshold and threshold_fraction");
  if (ev.kind == EventKind::terminal_distance_below) {
    require(!reference.is_null(), "experiment.event.reference is required for terminal_distance_below");
    if (reference.is_object() && reference.value("kind", "") == "skeleton_terminal") {
      Reader rr(reference, "experiment.event.reference");
      rr.string("kind", "");
      Json spec = rr.raw("control");
      if (spec.is_null()) spec = c.experiment.planted;
      require(!spec.is_null(), "experiment.event.reference.control (or experiment.planted) is required");
      const ControlField g = build_control(spec, problem.params.horizon, problem.space.size(), c.base_dir,
                                           "experiment.event.reference.control");
      rr.finish();
      ev.reference = *solve_skeleton(problem, g).final_state;
    } else {
      ev.reference = build_field(reference, problem.u0.grid(), c.base_dir, "experiment.event.reference");
    }
    if (fraction) {
      require(*fraction > 0.0, "experiment.event.threshold_fraction must be positive");
      const VelocityField base = *solve_skeleton(problem, ControlField::unit(problem.params.horizon,
                                                                             problem.space.size()))
                                      .final_state;
      ev.threshold = *fraction * norms(*ev.reference - base).h;
    } else {
      ev.threshold = *threshold;
    }
  } else {
    require(reference.is_null(), "experiment.event.reference only applies to terminal_distance_below");
    require(!fraction, "experiment.event.threshold_fraction only applies to terminal_distance_below");
    ev.threshold = *threshold;
  }
  return ev;
}

}  // namespace jumpns::app
