#include <doctest.h>

#include <cmath>
#include <limits>

#include "jumpns/errors.hpp"
#include "jumpns/ldp.hpp"

using namespace jumpns;

namespace {

SkeletonProblem planted_problem() {
  const auto g = make_grid(8);
  SkeletonProblem p{random_field(41, g, 1.5, 0.5), {}, {{1.0, 0.5}, random_field(42, g, 1.5, 0.5), 0.2},
                    MarkSpace({1.0, 0.5}), ControlField::unit(1.0, 2)};
  p.params.dt = 0.01;
  p.params.horizon = 1.0;
  return p;
}

SkeletonProblem shear_problem() {
  const auto g = make_grid(8);
  const auto mode = VelocityField::single_mode(g, 1, 0, 1.0);
  SkeletonProblem p{VelocityField::zero(g), {}, {{1.0, 0.5}, (1.0 / norms(mode).h) * mode, 0.0},
                    MarkSpace({1.0, 1.0}), ControlField::unit(1.0, 2)};
  p.params.dt = 0.01;
  p.params.horizon = 1.0;
  return p;
}

}  // namespace

TEST_CASE("event kinds parse and score") {
  CHECK(event_kind_from_string("sup_V_norm_above") == EventKind::sup_v_norm_above);
  CHECK(to_string(EventKind::terminal_distance_below) == "terminal_distance_below");
  CHECK_THROWS_AS(event_kind_from_string("bogus"), ConfigError);

  auto p = shear_problem();
  p.u0 = VelocityField::single_mode(p.u0.grid(), 1, 0, 1.0);
  const auto tr = solve_skeleton(p);
  const double h = tr.norms.back().h;
  EventFunctional above{EventKind::terminal_energy_above, h * h * 1.01, {}};
  CHECK_FALSE(above.contains(tr));
  CHECK(above.residual(tr) == doctest::Approx(0.01 * h * h));
  above.threshold = h * h;
  CHECK(above.contains(tr));
  CHECK(above.residual(tr) == 0.0);
  EventFunctional sup{EventKind::sup_v_norm_above, tr.norms.front().v, {}};
  CHECK(sup.contains(tr));
  EventFunctional near{EventKind::terminal_distance_below, 1e-12, *tr.final_state};
  CHECK(near.contains(tr));
  EventFunctional missing{EventKind::terminal_distance_below, 1.0, {}};
  CHECK_THROWS_AS(missing.score(tr), ConfigError);
}

TEST_CASE("Nelder-Mead minimizes the Rosenbrock function") {
  auto rosen = [](std::span<const double> x) {
    return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
  };
  NelderMeadOptions o;
  o.max_evals = 5000;
  o.ftol = 1e-14;
  o.xtol = 1e-10;
  const auto r = nelder_mead(rosen, {-1.2, 1.0}, o);
  CHECK(r.converged);
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(r.evals <= 5000);
}

TEST_CASE("Nelder-Mead respects its evaluation budget and handles non-finite values") {
  int calls = 0;
  auto f = [&](std::span<const double> x) {
    ++calls;
    return x[0] < -5 ? std::numeric_limits<double>::quiet_NaN() : std::abs(x[0] - 3.0) + std::abs(x[1]);
  };
  NelderMeadOptions o;
  o.max_evals = 50;
  const auto r = nelder_mead(f, {0.0, 0.0}, o);
  CHECK(calls == r.evals);
  CHECK(r.evals <= 52);
}

TEST_CASE("parameterization clamps log g to the bound") {
  RateParameterization param{2, 4};
  const std::vector<double> x{10.0, -10.0, 0.0, std::log(2.0)};
  const auto g = param.decode(x, 1.0, 2);
  CHECK(g.value(0, 0) == doctest::Approx(4.0));
  CHECK(g.value(0, 1) == doctest::Approx(0.25));
  CHECK(g.value(1, 0) == 1.0);
  CHECK(g.value(1, 1) == doctest::Approx(2.0));
  CHECK(g.bound_n() <= 4);
  CHECK_THROWS_AS(param.decode(std::vector<double>(3, 0.0), 1.0, 2), ConfigError);
}

TEST_CASE("events containing the unperturbed path have zero rate") {
  const auto p = planted_problem();
  const auto base = solve_skeleton(p);
  const double h = base.norms.back().h;
  const EventFunctional ev{EventKind::terminal_energy_above, 0.5 * h * h, {}};
  const auto r = minimize_rate(ev, p, {}, {}, 1);
  CHECK(r.feasible);
  CHECK(r.rate_value == 0.0);
  CHECK(r.control.is_unit());
}

TEST_CASE("planted control bounds the recovered rate") {
  const auto p = planted_problem();
  const auto planted = ControlField::uniform(1.0, 4, 2, {2.0, 1.0, 1.5, 0.5, 1.0, 2.5, 0.8, 1.0}, 3);
  const auto target = solve_skeleton(p, planted);
  const auto base = solve_skeleton(p);
  const double gap = norms(*target.final_state - *base.final_state).h;
  RateParameterization param{4, 8};
  OptimizerConfig cfg;
  const double lt_star = entropy_LT(planted, p.space);
  double previous = 0.0;
  for (double frac : {0.3, 0.15}) {
    const EventFunctional ev{EventKind::terminal_distance_below, frac * gap, *target.final_state};
    const auto r = minimize_rate(ev, p, param, cfg, 5);
    CHECK(r.feasible);
    CHECK(r.constraint_residual <= cfg.residual_tol);
    CHECK(r.rate_value <= lt_star + 1e-3);
    CHECK(std::abs(entropy_LT(r.control, p.space) - r.rate_value) <= 1e-12);
    CHECK(ev.contains(solve_skeleton(p, r.control)));
    // Tighter event, smaller feasible set.
    CHECK(r.rate_value >= previous - 1e-3);
    previous = r.rate_value;
  }
}

TEST_CASE("Wilson interval reference values") {
  auto [lo, hi] = wilson_interval(0, 10);
  CHECK(lo == 0.0);
  CHECK(hi == doctest::Approx(0.2775327).epsilon(1e-6));
  std::tie(lo, hi) = wilson_interval(5, 10);
  CHECK(lo == doctest::Approx(0.2365931).epsilon(1e-6));
  CHECK(hi == doctest::Approx(0.7634069).epsilon(1e-6));
  std::tie(lo, hi) = wilson_interval(10, 10);
  CHECK(hi == 1.0);
}

TEST_CASE("plain Monte Carlo on trivial events and determinism") {
  const auto p = shear_problem();
  const EventFunctional all{EventKind::terminal_energy_above, -std::numeric_limits<double>::infinity(), {}};
  const EventFunctional none{EventKind::terminal_energy_above, std::numeric_limits<double>::infinity(), {}};
  CHECK(mc_probability(all, 0.5, 50, 1, p).p_hat == 1.0);
  const auto z = mc_probability(none, 0.5, 50, 1, p);
  CHECK(z.p_hat == 0.0);
  CHECK(z.lower == 0.0);
  CHECK(z.upper > 0.0);
  const EventFunctional mid{EventKind::terminal_energy_above, 0.5, {}};
  const auto a = mc_probability(mid, 0.5, 1000, 9, p);
  const auto b = mc_probability(mid, 0.5, 1000, 9, p);
  CHECK(a.p_hat == b.p_hat);
  CHECK(a.hits == b.hits);
  CHECK(a.hits > 0);
  CHECK(a.hits < 1000);
}

TEST_CASE("unit tilt reproduces plain Monte Carlo with unit weights") {
  const auto p = shear_problem();
  const EventFunctional ev{EventKind::terminal_energy_above, 0.5, {}};
  const auto plain = mc_probability(ev, 0.5, 500, 3, p);
  std::vector<double> w;
  const auto tilted = importance_sampled_probability(ev, 0.5, ControlField::unit(1.0, 2), 500, 3, p, &w);
  CHECK(tilted.p_hat == plain.p_hat);
  CHECK(tilted.hits == plain.hits);
  REQUIRE(w.size() == 500);
  for (double x : w) CHECK(x == 1.0);
  CHECK_THROWS_AS(importance_sampled_probability(ev, 0.5, ControlField::unit(1.0, 3), 10, 3, p), ConfigError);
}

TEST_CASE("tilted and plain estimates agree and the tilt raises the effective sample size") {
  const auto p = shear_problem();
  const EventFunctional ev{EventKind::terminal_energy_above, 1.44, {}};
  const auto rate = minimize_rate(ev, p, {4, 8}, {}, 2);
  REQUIRE(rate.feasible);
  const double eps = 0.4;
  const auto plain = mc_probability(ev, eps, 8000, 11, p);
  const auto tilted = importance_sampled_probability(ev, eps, rate.control, 2000, 12, p);
  CHECK(plain.hits >= 30);
  CHECK(plain.lower <= tilted.upper);
  CHECK(tilted.lower <= plain.upper);
  const auto plain_small = mc_probability(ev, eps, 2000, 12, p);
  CHECK(tilted.effective_sample_size > static_cast<double>(plain_small.hits));
}

TEST_CASE("scaling table on a zero-rate event") {
  const auto p = shear_problem();
  const EventFunctional ev{EventKind::terminal_energy_above, -1.0, {}};
  const auto rate = minimize_rate(ev, p, {}, {}, 1);
  const auto t = ldp_scaling_table(ev, {0.4, 0.2, 0.1}, {{100, 0}, {100, 0}, {100, 0}}, rate, p, {});
  for (const auto& row : t.rows) {
    CHECK(row.p_hat == 1.0);
    CHECK(row.neg_eps_log_p == 0.0);
  }
  CHECK(t.within_band);
  CHECK(t.monotone);
  CHECK_THROWS_AS(ldp_scaling_table(ev, {0.4, 0.2}, {{1, 0}, {1, 0}}, rate, p, {}), ConfigError);
  CHECK_THROWS_AS(ldp_scaling_table(ev, {0.1, 0.2, 0.4}, {{1, 0}, {1, 0}, {1, 0}}, rate, p, {}), ConfigError);
}

TEST_CASE("rows below the hit floor are flagged") {
  const auto p = shear_problem();
  const EventFunctional ev{EventKind::terminal_energy_above, 100.0, {}};
  RateEstimate fake{ControlField::unit(1.0, 2), 1.0, 0.0, true, {}, {}};
  const auto t = ldp_scaling_table(ev, {0.4, 0.2, 0.1}, {{50, 0}, {50, 0}, {50, 0}}, fake, p, {});
  for (const auto& row : t.rows) CHECK(row.insufficient_hits);
  CHECK_FALSE(t.checked_row.has_value());
  CHECK_FALSE(t.within_band);
}

TEST_CASE("ensemble a-priori functional") {
  const auto p = shear_problem();
  const auto s = ensemble_upsilon(p, 0.5, 50, 3);
  CHECK(s.samples == 50);
  CHECK(s.mean > 0.0);
  CHECK(s.std_error > 0.0);
  CHECK(ensemble_upsilon(p, 0.5, 50, 3).mean == s.mean);
}
