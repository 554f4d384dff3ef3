#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "jumpns/errors.hpp"
#include "jumpns/field_io.hpp"
#include "jumpns/ldp.hpp"
#include "jumpns/rng.hpp"

namespace py = pybind11;
using namespace jumpns;

namespace {

py::array_t<Complex> to_array(std::span<const Complex> c, int n) {
  py::array_t<Complex> a({n, n});
  std::copy(c.begin(), c.end(), a.mutable_data());
  return a;
}

std::vector<Complex> from_array(const py::array_t<Complex, py::array::c_style | py::array::forcecast>& a,
                                const SpectralGrid& g) {
  if (static_cast<std::size_t>(a.size()) != g.size()) throw ConfigError("coefficient array must hold n*n entries");
  return {a.data(), a.data() + a.size()};
}

py::array_t<double> vec(const std::vector<double>& v) {
  py::array_t<double> a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

py::array_t<double> norm_table(const std::vector<NormTriple>& ns) {
  py::array_t<double> a({static_cast<py::ssize_t>(ns.size()), py::ssize_t{3}});
  auto m = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < ns.size(); ++i) {
    m(i, 0) = ns[i].h;
    m(i, 1) = ns[i].v;
    m(i, 2) = ns[i].da;
  }
  return a;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "jumpns core: spectral fields, PRM sampling, SPDE and skeleton solvers, rate estimates";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<CoverageError>(m, "CoverageError", PyExc_ValueError);
  py::register_exception<NumericalFailure>(m, "NumericalFailure", PyExc_ArithmeticError);

  m.def("stream_seed", &stream_seed, py::arg("master"), py::arg("index"));

  // spectral
  py::class_<SpectralGrid>(m, "SpectralGrid")
      .def(py::init([](int n, double length) { return SpectralGrid::make(n, length); }), py::arg("n_modes"),
           py::arg("domain_length") = 2.0 * std::numbers::pi)
      .def_property_readonly("n", &SpectralGrid::n)
      .def_property_readonly("length", &SpectralGrid::length)
      .def_property_readonly("dealias_cutoff", &SpectralGrid::dealias_cutoff);

  py::class_<NormTriple>(m, "NormTriple")
      .def_readonly("h", &NormTriple::h)
      .def_readonly("v", &NormTriple::v)
      .def_readonly("da", &NormTriple::da)
      .def("__repr__", [](const NormTriple& n) {
        return "NormTriple(h=" + std::to_string(n.h) + ", v=" + std::to_string(n.v) + ", da=" + std::to_string(n.da) + ")";
      });

  py::class_<VelocityField>(m, "VelocityField")
      .def_static("zero", &VelocityField::zero, py::arg("grid"))
      .def_static("single_mode", &VelocityField::single_mode, py::arg("grid"), py::arg("kx"), py::arg("ky"),
                  py::arg("amplitude") = 1.0)
      .def_static("random", [](std::uint64_t seed, const SpectralGrid& g, double decay, double amp) {
        return random_field(seed, g, decay, amp);
      }, py::arg("seed"), py::arg("grid"), py::arg("decay") = 1.5, py::arg("amplitude") = 1.0)
      .def_static("project", [](const SpectralGrid& g, py::array_t<Complex, py::array::c_style | py::array::forcecast> x,
                                py::array_t<Complex, py::array::c_style | py::array::forcecast> y) {
        return leray_project(g, CoefficientPair{from_array(x, g), from_array(y, g)});
      }, py::arg("grid"), py::arg("x"), py::arg("y"), "Leray projection of raw coefficient arrays")
      .def_static("load", &load_field, py::arg("path"))
      .def("save", [](const VelocityField& u, const std::string& path) { save_field(u, path); }, py::arg("path"))
      .def_property_readonly("grid", &VelocityField::grid)
      .def_property_readonly("x", [](const VelocityField& u) { return to_array(u.x(), u.grid().n()); })
      .def_property_readonly("y", [](const VelocityField& u) { return to_array(u.y(), u.grid().n()); })
      .def("norms", [](const VelocityField& u) { return norms(u); })
      .def("max_divergence", &VelocityField::max_divergence)
      .def("physical", [](const VelocityField& u, int m) {
        const auto p = to_physical(u, m);
        py::array_t<double> ux({p.m, p.m}), uy({p.m, p.m});
        std::copy(p.ux.begin(), p.ux.end(), ux.mutable_data());
        std::copy(p.uy.begin(), p.uy.end(), uy.mutable_data());
        return py::make_tuple(ux, uy);
      }, py::arg("m") = 0)
      .def(py::self + py::self)
      .def(py::self - py::self)
      .def("__mul__", [](const VelocityField& u, double s) { return s * u; })
      .def("__rmul__", [](const VelocityField& u, double s) { return s * u; })
      .def("__eq__", [](const VelocityField& a, const VelocityField& b) { return a == b; });

  m.def("bilinear", &bilinear, py::arg("u"), py::arg("v"));
  m.def("inner_h", &inner_h, py::arg("u"), py::arg("v"));
  m.def("apply_stokes", &apply_stokes, py::arg("u"));
  m.def("l4_norm", &l4_norm, py::arg("u"));

  // jump measure
  py::class_<MarkSpace>(m, "MarkSpace")
      .def(py::init<std::vector<double>>(), py::arg("weights"))
      .def(py::init<std::vector<std::string>, std::vector<double>>(), py::arg("labels"), py::arg("weights"))
      .def_property_readonly("weights", &MarkSpace::weights)
      .def_property_readonly("labels", &MarkSpace::labels)
      .def_property_readonly("total_mass", &MarkSpace::total_mass)
      .def("__len__", &MarkSpace::size);

  py::class_<ControlField>(m, "ControlField")
      .def(py::init<std::vector<double>, std::size_t, std::vector<double>, int>(), py::arg("breakpoints"),
           py::arg("marks"), py::arg("values"), py::arg("bound_n"))
      .def_static("unit", &ControlField::unit, py::arg("horizon"), py::arg("marks"))
      .def_static("constant", &ControlField::constant, py::arg("horizon"), py::arg("marks"), py::arg("value"),
                  py::arg("bound_n"))
      .def_static("uniform", &ControlField::uniform, py::arg("horizon"), py::arg("intervals"), py::arg("marks"),
                  py::arg("values"), py::arg("bound_n"))
      .def_static("from_json", &control_from_json, py::arg("text"))
      .def("to_json", &control_to_json)
      .def_property_readonly("breakpoints", &ControlField::breakpoints)
      .def_property_readonly("values", &ControlField::values)
      .def_property_readonly("bound_n", &ControlField::bound_n)
      .def("is_unit", &ControlField::is_unit)
      .def("__call__", &ControlField::operator(), py::arg("t"), py::arg("mark"));

  py::class_<MarkedPoint>(m, "MarkedPoint")
      .def_readonly("t", &MarkedPoint::t)
      .def_readonly("mark", &MarkedPoint::mark)
      .def_readonly("r", &MarkedPoint::r);
  py::class_<MarkedPointSample>(m, "MarkedPointSample")
      .def_readonly("horizon", &MarkedPointSample::horizon)
      .def_readonly("r_max", &MarkedPointSample::r_max)
      .def_readonly("points", &MarkedPointSample::points);
  py::class_<CountingPoint>(m, "CountingPoint")
      .def_readonly("t", &CountingPoint::t)
      .def_readonly("mark", &CountingPoint::mark);
  py::class_<CountingSample>(m, "CountingSample")
      .def_readonly("horizon", &CountingSample::horizon)
      .def_readonly("points", &CountingSample::points);

  m.def("sample_base_prm", &sample_base_prm, py::arg("seed"), py::arg("horizon"), py::arg("space"), py::arg("r_max"));
  m.def("thin", &thin, py::arg("sample"), py::arg("phi"), py::arg("scale"));
  m.def("entropy_LT", &entropy_LT, py::arg("g"), py::arg("space"));
  m.def("check_admissible", &check_admissible, py::arg("g"), py::arg("space"), py::arg("level"));
  m.def("girsanov_log_weight",
        py::overload_cast<const CountingSample&, const ControlField&, double, const MarkSpace&>(&girsanov_log_weight),
        py::arg("atoms"), py::arg("phi"), py::arg("eps"), py::arg("space"));

  // solvers
  py::enum_<StokesScheme>(m, "StokesScheme")
      .value("exponential", StokesScheme::exponential)
      .value("implicit_euler", StokesScheme::implicit_euler);
  py::enum_<CompensationForm>(m, "CompensationForm")
      .value("base_rate", CompensationForm::base_rate)
      .value("tilted_rate", CompensationForm::tilted_rate);

  py::class_<NoiseCoefficient>(m, "NoiseCoefficient")
      .def(py::init([](std::vector<double> sigma, VelocityField base, double gain) {
        return NoiseCoefficient{std::move(sigma), std::move(base), gain};
      }), py::arg("sigma"), py::arg("base"), py::arg("linear_gain") = 0.0)
      .def_readwrite("sigma", &NoiseCoefficient::sigma)
      .def_readwrite("base", &NoiseCoefficient::base)
      .def_readwrite("linear_gain", &NoiseCoefficient::linear_gain);

  py::class_<SolverParams>(m, "SolverParams")
      .def(py::init<>())
      .def_readwrite("dt", &SolverParams::dt)
      .def_readwrite("horizon", &SolverParams::horizon)
      .def_readwrite("eps", &SolverParams::eps)
      .def_readwrite("viscosity", &SolverParams::viscosity)
      .def_readwrite("cutoff_m", &SolverParams::cutoff_m)
      .def_readwrite("guard", &SolverParams::guard)
      .def_readwrite("scheme", &SolverParams::scheme)
      .def_readwrite("compensation", &SolverParams::compensation)
      .def_readwrite("nonlinear", &SolverParams::nonlinear)
      .def_readwrite("snapshot_stride", &SolverParams::snapshot_stride)
      .def("set_forcing", [](SolverParams& p, const VelocityField& f) { p.forcing = Forcing::constant(f); });

  py::class_<Trajectory>(m, "Trajectory")
      .def_property_readonly("times", [](const Trajectory& t) { return vec(t.times); })
      .def_property_readonly("norms", [](const Trajectory& t) { return norm_table(t.norms); })
      .def_readonly("jumps", &Trajectory::jumps)
      .def_property_readonly("log_weight", [](const Trajectory& t) {
        return vec(t.log_weight);
      })
      .def_property_readonly("upsilon_h", [](const Trajectory& t) {
        return vec(t.upsilon_h);
      })
      .def_property_readonly("upsilon_v", [](const Trajectory& t) {
        return vec(t.upsilon_v);
      })
      .def_property_readonly("final_state", [](const Trajectory& t) { return *t.final_state; })
      .def_property_readonly("guard_exceeded", [](const Trajectory& t) { return t.status == RunStatus::guard_exceeded; })
      .def_readonly("blowup_time", &Trajectory::blowup_time);

  m.def("simulate", [](const VelocityField& u0, const SolverParams& p, const NoiseCoefficient& noise,
                       const MarkSpace& space, std::uint64_t seed, std::optional<ControlField> control) {
    py::gil_scoped_release release;
    return simulate(u0, p, noise, space, seed, control ? &*control : nullptr);
  }, py::arg("u0"), py::arg("params"), py::arg("noise"), py::arg("space"), py::arg("seed"),
        py::arg("control") = py::none());

  py::class_<SkeletonProblem>(m, "SkeletonProblem")
      .def(py::init([](VelocityField u0, SolverParams p, NoiseCoefficient noise, MarkSpace space,
                       std::optional<ControlField> g) {
        ControlField gg = g ? *g : ControlField::unit(p.horizon, space.size());
        return SkeletonProblem{std::move(u0), std::move(p), std::move(noise), std::move(space), std::move(gg)};
      }), py::arg("u0"), py::arg("params"), py::arg("noise"), py::arg("space"), py::arg("g") = py::none())
      .def_readwrite("u0", &SkeletonProblem::u0)
      .def_readwrite("params", &SkeletonProblem::params)
      .def_readwrite("noise", &SkeletonProblem::noise)
      .def_readwrite("g", &SkeletonProblem::g);

  m.def("solve_skeleton", [](const SkeletonProblem& p, std::optional<ControlField> g) {
    py::gil_scoped_release release;
    return g ? solve_skeleton(p, *g) : solve_skeleton(p);
  }, py::arg("problem"), py::arg("g") = py::none());
  m.def("skeleton_continuity_probe", &skeleton_continuity_probe, py::arg("g_sequence"), py::arg("g_limit"),
        py::arg("problem"), py::call_guard<py::gil_scoped_release>());

  // ldp
  py::enum_<EventKind>(m, "EventKind")
      .value("terminal_energy_above", EventKind::terminal_energy_above)
      .value("sup_v_norm_above", EventKind::sup_v_norm_above)
      .value("terminal_distance_below", EventKind::terminal_distance_below);

  py::class_<EventFunctional>(m, "EventFunctional")
      .def(py::init([](EventKind kind, double threshold, std::optional<VelocityField> reference) {
        return EventFunctional{kind, threshold, std::move(reference)};
      }), py::arg("kind"), py::arg("threshold"), py::arg("reference") = py::none())
      .def_readonly("kind", &EventFunctional::kind)
      .def_readonly("threshold", &EventFunctional::threshold)
      .def("score", &EventFunctional::score)
      .def("contains", &EventFunctional::contains)
      .def("residual", &EventFunctional::residual);

  py::class_<RateParameterization>(m, "RateParameterization")
      .def(py::init([](std::size_t intervals, int bound_n) { return RateParameterization{intervals, bound_n}; }),
           py::arg("intervals") = 4, py::arg("bound_n") = 8)
      .def_readwrite("intervals", &RateParameterization::intervals)
      .def_readwrite("bound_n", &RateParameterization::bound_n);

  py::class_<OptimizerConfig>(m, "OptimizerConfig")
      .def(py::init<>())
      .def_property("max_evals", [](const OptimizerConfig& c) { return c.simplex.max_evals; },
                    [](OptimizerConfig& c, int v) { c.simplex.max_evals = v; })
      .def_readwrite("restarts", &OptimizerConfig::restarts)
      .def_readwrite("penalty_levels", &OptimizerConfig::penalty_levels)
      .def_readwrite("residual_tol", &OptimizerConfig::residual_tol);

  py::class_<RateEstimate>(m, "RateEstimate")
      .def_readonly("control", &RateEstimate::control)
      .def_readonly("rate_value", &RateEstimate::rate_value)
      .def_readonly("constraint_residual", &RateEstimate::constraint_residual)
      .def_readonly("feasible", &RateEstimate::feasible)
      .def_readonly("message", &RateEstimate::message);

  m.def("minimize_rate", [](const EventFunctional& ev, const SkeletonProblem& p, const RateParameterization& param,
                            const OptimizerConfig& cfg, std::uint64_t seed) {
    py::gil_scoped_release release;
    return minimize_rate(ev, p, param, cfg, seed);
  }, py::arg("event"), py::arg("problem"), py::arg("parameterization") = RateParameterization{},
        py::arg("config") = OptimizerConfig{}, py::arg("seed") = 1);

  py::class_<ProbabilityEstimate>(m, "ProbabilityEstimate")
      .def_readonly("p_hat", &ProbabilityEstimate::p_hat)
      .def_readonly("lower", &ProbabilityEstimate::lower)
      .def_readonly("upper", &ProbabilityEstimate::upper)
      .def_readonly("std_error", &ProbabilityEstimate::std_error)
      .def_readonly("hits", &ProbabilityEstimate::hits)
      .def_readonly("samples", &ProbabilityEstimate::samples)
      .def_readonly("effective_sample_size", &ProbabilityEstimate::effective_sample_size);

  m.def("wilson_interval", &wilson_interval, py::arg("hits"), py::arg("n"));
  m.def("mc_probability", &mc_probability, py::arg("event"), py::arg("eps"), py::arg("n_samples"), py::arg("seed"),
        py::arg("problem"), py::call_guard<py::gil_scoped_release>());
  m.def("importance_sampled_probability", [](const EventFunctional& ev, double eps, const ControlField& tilt,
                                             std::size_t n, std::uint64_t seed, const SkeletonProblem& p) {
    py::gil_scoped_release release;
    return importance_sampled_probability(ev, eps, tilt, n, seed, p);
  }, py::arg("event"), py::arg("eps"), py::arg("tilt"), py::arg("n_samples"), py::arg("seed"), py::arg("problem"));

  py::class_<EnsembleStats>(m, "EnsembleStats")
      .def_readonly("mean", &EnsembleStats::mean)
      .def_readonly("std_error", &EnsembleStats::std_error)
      .def_readonly("samples", &EnsembleStats::samples)
      .def_readonly("guard_hits", &EnsembleStats::guard_hits);
  m.def("ensemble_upsilon", [](const SkeletonProblem& p, double eps, std::size_t n, std::uint64_t seed,
                               std::optional<ControlField> control) {
    py::gil_scoped_release release;
    return ensemble_upsilon(p, eps, n, seed, control ? &*control : nullptr);
  }, py::arg("problem"), py::arg("eps"), py::arg("n_samples"), py::arg("seed"), py::arg("control") = py::none());
}
