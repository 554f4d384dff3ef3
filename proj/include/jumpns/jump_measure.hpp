#pragma once

// Poisson random measures on [0,T] x Z x [0, r_max] over a finite mark space,
// thinning by deterministic step controls, the entropy functional L_T and the
// Girsanov log-density of a thinned measure.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace jumpns {

/// Finite mark space Z = {z_1..z_M} with intensity weights nu(z_j) > 0.
class MarkSpace {
 public:
  MarkSpace(std::vector<std::string> labels, std::vector<double> weights);
  /// Labels "z1".."zM".
  explicit MarkSpace(std::vector<double> weights);

  std::size_t size() const { return weights_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<double>& weights() const { return weights_; }
  double weight(std::size_t j) const { return weights_[j]; }
  double total_mass() const { return total_; }

 private:
  std::vector<std::string> labels_;
  std::vector<double> weights_;
  double total_ = 0.0;
};

struct MarkedPoint {
  double t = 0.0;
  std::size_t mark = 0;
  double r = 0.0;
};

/// Atoms of the base measure N on (0,T] x Z x (0, r_max], sorted by time.
struct MarkedPointSample {
  double horizon = 0.0;
  double r_max = 0.0;
  std::vector<MarkedPoint> points;
};

struct CountingPoint {
  double t = 0.0;
  std::size_t mark = 0;
};

/// Atoms of a thinned measure N^phi, sorted by time.
struct CountingSample {
  double horizon = 0.0;
  std::vector<CountingPoint> points;
};

/// Deterministic control g(t, z_j) = values[i*M + j] for t in (t_{i-1}, t_i],
/// with every value in [1/bound_n, bound_n].
class ControlField {
 public:
  ControlField(std::vector<double> breakpoints, std::size_t marks, std::vector<double> values,
               int bound_n);

  static ControlField unit(double horizon, std::size_t marks);
  static ControlField constant(double horizon, std::size_t marks, double value, int bound_n);
  /// Uniform breakpoints over [0, horizon] with the given row-major table.
  static ControlField uniform(double horizon, std::size_t intervals, std::size_t marks,
                              std::vector<double> values, int bound_n);

  double horizon() const { return breakpoints_.back(); }
  std::size_t intervals() const { return breakpoints_.size() - 1; }
  std::size_t marks() const { return marks_; }
  int bound_n() const { return bound_n_; }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<double>& values() const { return values_; }

  double value(std::size_t interval, std::size_t mark) const { return values_[interval * marks_ + mark]; }
  /// Interval index containing t (t <= 0 maps to the first interval, t > T to the last).
  std::size_t interval_of(double t) const;
  double operator()(double t, std::size_t mark) const { return value(interval_of(t), mark); }
  double max_value() const;
  double min_value() const;
  bool is_unit() const;

  /// Smallest integer n with every value in [1/n, n].
  static int required_bound(const std::vector<double>& values);

  friend bool operator==(const ControlField&, const ControlField&) = default;

 private:
  std::vector<double> breakpoints_;
  std::size_t marks_;
  std::vector<double> values_;
  int bound_n_;
};

/// Draws the base measure: count ~ Poisson(T nu(Z) r_max), times uniform on
/// (0,T], marks categorical in nu, r uniform on (0, r_max]. Deterministic in seed.
MarkedPointSample sample_base_prm(std::uint64_t seed, double horizon, const MarkSpace& space,
                                  double r_max);

/// Keeps (t, z, r) iff r <= scale * phi(t, z). Throws CoverageError when
/// scale * max(phi) exceeds sample.r_max.
CountingSample thin(const MarkedPointSample& sample, const ControlField& phi, double scale);

/// l(x) = x log x - x + 1 with l(0) = 1.
double entropy_density(double x);

/// L_T(g) = sum_i dt_i sum_j l(g_ij) nu(z_j).
double entropy_LT(const ControlField& g, const MarkSpace& space);

/// Membership in S^N = {g : L_T(g) <= N}.
bool check_admissible(const ControlField& g, const MarkSpace& space, double level);

/// log M^eps_T for the measure N^{phi/eps}:
///   sum over kept atoms of -log phi(t_k, z_k) + (1/eps) sum_i dt_i sum_j (phi_ij - 1) nu_j.
double girsanov_log_weight(const MarkedPointSample& base, const ControlField& phi, double eps,
                           const MarkSpace& space);

/// Same weight from an already-thinned sample (the atoms of N^{phi/eps}).
double girsanov_log_weight(const CountingSample& atoms, const ControlField& phi, double eps,
                           const MarkSpace& space);

/// Compensator part (1/eps) sum_i dt_i sum_j (phi_ij - 1) nu_j accumulated over (0, t].
double girsanov_compensator(const ControlField& phi, double eps, const MarkSpace& space, double t);

// Text formats -------------------------------------------------------------

/// JSON text: {"breakpoints": [...], "marks": M, "values": [row-major], "bound_n": n}.
std::string control_to_json(const ControlField& g);
ControlField control_from_json(const std::string& text);
ControlField load_control(const std::string& path);
void save_control(const ControlField& g, const std::string& path);

/// CSV with header "t,mark,r".
void write_points_csv(const MarkedPointSample& sample, std::ostream& os);

}  // namespace jumpns
