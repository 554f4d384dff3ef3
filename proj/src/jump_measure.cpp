#include "jumpns/jump_measure.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

#include "jumpns/errors.hpp"
#include "jumpns/rng.hpp"

namespace jumpns {

MarkSpace::MarkSpace(std::vector<std::string> labels, std::vector<double> weights)
    : labels_(std::move(labels)), weights_(std::move(weights)) {
  if (weights_.empty()) throw ConfigError("mark space must contain at least one mark");
  if (labels_.size() != weights_.size()) throw ConfigError("mark labels and weights differ in length");
  for (double w : weights_) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("mark weights must be finite and positive");
    total_ += w;
  }
}

MarkSpace::MarkSpace(std::vector<double> weights)
    : MarkSpace(
          [&] {
            std::vector<std::string> l;
            for (std::size_t j = 0; j < weights.size(); ++j) l.push_back("z" + std::to_string(j + 1));
            return l;
          }(),
          weights) {}

// ---------------------------------------------------------------------------

ControlField::ControlField(std::vector<double> breakpoints, std::size_t marks,
                           std::vector<double> values, int bound_n)
    : breakpoints_(std::move(breakpoints)), marks_(marks), values_(std::move(values)), bound_n_(bound_n) {
  if (breakpoints_.size() < 2) throw ConfigError("control needs at least one time interval");
  if (breakpoints_.front() != 0.0) throw ConfigError("control breakpoints must start at 0");
  for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
    if (!(breakpoints_[i] > breakpoints_[i - 1])) {
      throw ConfigError("control breakpoints must be strictly increasing");
    }
  }
  if (marks_ == 0) throw ConfigError("control needs at least one mark");
  if (values_.size() != intervals() * marks_) {
    throw ConfigError("control value table has " + std::to_string(values_.size()) +
                      " entries, expected " + std::to_string(intervals() * marks_));
  }
  if (bound_n_ < 1) throw ConfigError("control bound_n must be >= 1");
  const double lo = 1.0 / bound_n_;
  const double hi = static_cast<double>(bound_n_);
  for (double v : values_) {
    if (!(v >= lo * (1.0 - 1e-12) && v <= hi * (1.0 + 1e-12))) {
      std::ostringstream msg;
      msg << "control value " << v << " outside [1/" << bound_n_ << ", " << bound_n_ << "]";
      throw ConfigError(msg.str());
    }
  }
}

ControlField ControlField::unit(double horizon, std::size_t marks) {
  return ControlField({0.0, horizon}, marks, std::vector<double>(marks, 1.0), 1);
}

ControlField ControlField::constant(double horizon, std::size_t marks, double value, int bound_n) {
  return ControlField({0.0, horizon}, marks, std::vector<double>(marks, value), bound_n);
}

ControlField ControlField::uniform(double horizon, std::size_t intervals, std::size_t marks,
                                   std::vector<double> values, int bound_n) {
  if (intervals == 0) throw ConfigError("control needs at least one time interval");
  std::vector<double> bp(intervals + 1);
  for (std::size_t i = 0; i <= intervals; ++i) bp[i] = horizon * static_cast<double>(i) / intervals;
  bp.back() = horizon;
  return ControlField(std::move(bp), marks, std::move(values), bound_n);
}

std::size_t ControlField::interval_of(double t) const {
  // First breakpoint >= t closes the interval (t_{i-1}, t_i].
  const auto it = std::lower_bound(breakpoints_.begin() + 1, breakpoints_.end(), t);
  if (it == breakpoints_.end()) return intervals() - 1;
  return static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
}

double ControlField::max_value() const { return *std::max_element(values_.begin(), values_.end()); }
double ControlField::min_value() const { return *std::min_element(values_.begin(), values_.end()); }

bool ControlField::is_unit() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 1.0; });
}

int ControlField::required_bound(const std::vector<double>& values) {
  double worst = 1.0;
  for (double v : values) {
    if (!(v > 0.0)) throw ConfigError("control values must be positive");
    worst = std::max({worst, v, 1.0 / v});
  }
  return static_cast<int>(std::ceil(worst - 1e-12));
}

// ---------------------------------------------------------------------------

MarkedPointSample sample_base_prm(std::uint64_t seed, double horizon, const MarkSpace& space,
                                  double r_max) {
  if (!(horizon > 0.0)) throw ConfigError("sample_base_prm: horizon must be positive");
  if (!(r_max >= 0.0)) throw ConfigError("sample_base_prm: r_max must be nonnegative");
  MarkedPointSample out{horizon, r_max, {}};
  RandomStream rng(seed);
  const std::uint64_t count = rng.poisson(horizon * space.total_mass() * r_max);
  if (count == 0) return out;

  std::vector<double> cumulative(space.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < space.size(); ++j) {
    acc += space.weight(j);
    cumulative[j] = acc / space.total_mass();
  }
  out.points.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    MarkedPoint p;
    p.t = horizon * rng.uniform_open0();
    const double u = rng.canonical();
    p.mark = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                      cumulative.begin());
    p.mark = std::min(p.mark, space.size() - 1);
    p.r = r_max * rng.uniform_open0();
    out.points.push_back(p);
  }
  std::stable_sort(out.points.begin(), out.points.end(),
                   [](const MarkedPoint& a, const MarkedPoint& b) { return a.t < b.t; });
  return out;
}

namespace {

void check_coverage(const MarkedPointSample& sample, const ControlField& phi, double scale) {
  const double needed = scale * phi.max_value();
  if (needed > sample.r_max * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "thinning window not covered: scale * max(phi) = " << needed
        << " exceeds r_max = " << sample.r_max;
    throw CoverageError(msg.str());
  }
}

}  // namespace

CountingSample thin(const MarkedPointSample& sample, const ControlField& phi, double scale) {
  if (!(scale >= 0.0)) throw ConfigError("thin: scale must be nonnegative");
  check_coverage(sample, phi, scale);
  CountingSample out{sample.horizon, {}};
  if (scale == 0.0) return out;
  for (const auto& p : sample.points) {
    if (p.mark >= phi.marks()) throw ConfigError("thin: mark index outside the control table");
    if (p.r <= scale * phi(p.t, p.mark)) out.points.push_back({p.t, p.mark});
  }
  return out;
}

double entropy_density(double x) {
  if (x == 0.0) return 1.0;
  return x * std::log(x) - x + 1.0;
}

double entropy_LT(const ControlField& g, const MarkSpace& space) {
  if (g.marks() != space.size()) throw ConfigError("entropy_LT: control and mark space disagree");
  double total = 0.0;
  for (std::size_t i = 0; i < g.intervals(); ++i) {
    const double dt = g.breakpoints()[i + 1] - g.breakpoints()[i];
    double row = 0.0;
    for (std::size_t j = 0; j < g.marks(); ++j) row += entropy_density(g.value(i, j)) * space.weight(j);
    total += dt * row;
  }
  return total;
}

bool check_admissible(const ControlField& g, const MarkSpace& space, double level) {
  return entropy_LT(g, space) <= level;
}

double girsanov_compensator(const ControlField& phi, double eps, const MarkSpace& space, double t) {
  if (phi.marks() != space.size()) throw ConfigError("girsanov: control and mark space disagree");
  double total = 0.0;
  for (std::size_t i = 0; i < phi.intervals(); ++i) {
    const double a = phi.breakpoints()[i];
    const double b = std::min(phi.breakpoints()[i + 1], t);
    if (b <= a) break;
    double row = 0.0;
    for (std::size_t j = 0; j < phi.marks(); ++j) row += (phi.value(i, j) - 1.0) * space.weight(j);
    total += (b - a) * row;
  }
  return total / eps;
}

double girsanov_log_weight(const CountingSample& atoms, const ControlField& phi, double eps,
                           const MarkSpace& space) {
  if (!(eps > 0.0)) throw ConfigError("girsanov: eps must be positive");
  double jump_part = 0.0;
  for (const auto& p : atoms.points) jump_part -= std::log(phi(p.t, p.mark));
  return jump_part + girsanov_compensator(phi, eps, space, atoms.horizon);
}

double girsanov_log_weight(const MarkedPointSample& base, const ControlField& phi, double eps,
                           const MarkSpace& space) {
  if (!(eps > 0.0)) throw ConfigError("girsanov: eps must be positive");
  return girsanov_log_weight(thin(base, phi, 1.0 / eps), phi, eps, space);
}

// ---------------------------------------------------------------------------

std::string control_to_json(const ControlField& g) {
  nlohmann::ordered_json j;
  j["breakpoints"] = g.breakpoints();
  j["marks"] = g.marks();
  j["values"] = g.values();
  j["bound_n"] = g.bound_n();
  return j.dump(2) + "\n";
}

ControlField control_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("control file is not valid JSON: ") + e.what());
  }
  for (const char* key : {"breakpoints", "marks", "values", "bound_n"}) {
    if (!j.contains(key)) throw ConfigError(std::string("control file missing key '") + key + "'");
  }
  for (const auto& [key, _] : j.items()) {
    if (key != "breakpoints" && key != "marks" && key != "values" && key != "bound_n") {
      throw ConfigError("control file has unknown key '" + key + "'");
    }
  }
  try {
    return ControlField(j.at("breakpoints").get<std::vector<double>>(), j.at("marks").get<std::size_t>(),
                        j.at("values").get<std::vector<double>>(), j.at("bound_n").get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("control file has a malformed field: ") + e.what());
  }
}

ControlField load_control(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open control file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return control_from_json(ss.str());
}

void save_control(const ControlField& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write control file '" + path + "'");
  out << control_to_json(g);
}

void write_points_csv(const MarkedPointSample& sample, std::ostream& os) {
  os << "t,mark,r\n";
  os << std::setprecision(17);
  for (const auto& p : sample.points) os << p.t << ',' << p.mark << ',' << p.r << '\n';
}

}  // namespace jumpns
