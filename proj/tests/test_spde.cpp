#include <doctest.h>

#include <cmath>
#include <sstream>

#include "jumpns/errors.hpp"
#include "jumpns/rng.hpp"
#include "jumpns/skeleton.hpp"
#include "jumpns/spde.hpp"

using namespace jumpns;

namespace {

SolverParams params(double dt, double T, double eps = 1.0) {
  SolverParams p;
  p.dt = dt;
  p.horizon = T;
  p.eps = eps;
  return p;
}

NoiseCoefficient silent_noise(const SpectralGrid& g, std::size_t marks) {
  return {std::vector<double>(marks, 0.0), VelocityField::zero(g), 0.0};
}

// Amplitude of u along the unit-H direction e.
double along(const VelocityField& u, const VelocityField& e) { return inner_h(u, e); }

}  // namespace

TEST_CASE("step count validation") {
  CHECK(params(0.01, 1.0).steps() == 100);
  CHECK(params(0.1, 0.3).steps() == 3);
  CHECK_THROWS_AS(params(0.0, 1.0).steps(), ConfigError);
  CHECK_THROWS_AS(params(0.3, 1.0).steps(), ConfigError);
  CHECK_THROWS_AS(params(0.01, -1.0).steps(), ConfigError);
}

TEST_CASE("theta cutoff is C2 and monotone") {
  const double m = 2.0;
  CHECK(theta_cutoff(m, 0.0) == 1.0);
  CHECK(theta_cutoff(m, 2.0) == 1.0);
  CHECK(theta_cutoff(m, 3.0) == 0.0);
  CHECK(theta_cutoff(m, 2.5) == doctest::Approx(0.5));
  const double h = 1e-4;
  for (double x : {2.0, 3.0}) {
    const double d1 = (theta_cutoff(m, x + h) - theta_cutoff(m, x - h)) / (2 * h);
    const double d2 = (theta_cutoff(m, x + h) - 2 * theta_cutoff(m, x) + theta_cutoff(m, x - h)) / (h * h);
    CHECK(std::abs(d1) < 1e-6);
    CHECK(std::abs(d2) < 1e-2);
  }
  double prev = 1.0;
  for (int i = 0; i <= 100; ++i) {
    const double v = theta_cutoff(m, 2.0 + i / 100.0);
    CHECK(v <= prev);
    prev = v;
  }
}

TEST_CASE("implicit Euler step divides by 1 + dt |k|^2") {
  const auto g = make_grid(16);
  const auto u = VelocityField::single_mode(g, 1, 1, 1.0);
  auto p = params(0.1, 0.1);
  p.scheme = StokesScheme::implicit_euler;
  const MarkSpace s({1.0});
  const auto next = step(u, p, silent_noise(g, 1), s, {}, nullptr, 0.0);
  CHECK(norms(next - (1.0 / 1.2) * u).h < 1e-15);
  p.scheme = StokesScheme::exponential;
  const auto ex = step(u, p, silent_noise(g, 1), s, {}, nullptr, 0.0);
  CHECK(norms(ex - std::exp(-0.2) * u).h < 1e-15);
}

TEST_CASE("single mode decays as exp(-|k|^2 t)") {
  const auto g = make_grid(16);
  const auto u0 = VelocityField::single_mode(g, 1, 1, 1.0);
  const MarkSpace s({1.0});
  const auto p = params(1e-4, 1.0);
  const auto tr = simulate(u0, p, silent_noise(g, 1), s, 1);
  const double h0 = norms(u0).h;
  double worst = 0.0;
  for (std::size_t i = 0; i < tr.times.size(); i += 100) {
    worst = std::max(worst, std::abs(tr.norms[i].h / h0 - std::exp(-2.0 * tr.times[i])));
  }
  CHECK(worst < 1e-6);
  CHECK(tr.times.size() == 10001);
}

TEST_CASE("energy identity for the unforced deterministic flow") {
  const auto g = make_grid(16);
  const auto u0 = random_field(3, g, 1.5, 1.0);
  const MarkSpace s({1.0});
  for (double dt : {2e-3, 1e-3}) {
    const auto tr = simulate(u0, params(dt, 0.5), silent_noise(g, 1), s, 1);
    const auto e = energy_diagnostic(tr);
    const double lhs = tr.norms.back().h * tr.norms.back().h + 2.0 * e.int_v2;
    const double h0 = norms(u0).h;
    CHECK(std::abs(lhs - h0 * h0) / (h0 * h0) < 2e-3);
    CHECK(e.upsilon_h() == tr.upsilon_h.back());
    CHECK(e.upsilon_v() == tr.upsilon_v.back());
  }
}

TEST_CASE("step halving shows first-order convergence") {
  const auto g = make_grid(16);
  const auto u0 = random_field(4, g, 1.3, 2.0);
  const MarkSpace s({1.0});
  auto run = [&](double dt) { return *simulate(u0, params(dt, 0.5), silent_noise(g, 1), s, 1).final_state; };
  const auto ref = run(1e-4 / 4);
  const double e1 = norms(run(4e-3) - ref).h;
  const double e2 = norms(run(2e-3) - ref).h;
  const double e3 = norms(run(1e-3) - ref).h;
  CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.15));
  CHECK(e2 / e3 == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("single atom in an additive linear model matches the closed form") {
  const auto g = make_grid(16);
  const auto e = (1.0 / norms(VelocityField::single_mode(g, 1, 0, 1.0)).h) * VelocityField::single_mode(g, 1, 0, 1.0);
  const MarkSpace s({1.0, 0.5});
  const NoiseCoefficient noise{{1.0, 0.5}, e, 0.0};
  const double eps = 0.2, dt = 0.01;
  const auto p = params(dt, 1.0, eps);
  const CountingSample atoms{1.0, {{0.333, 0}, {0.5, 1}}};
  const auto tr = simulate_with_atoms(VelocityField::zero(g), p, noise, s, atoms, nullptr);
  // drift -(sum sigma nu) = -1.25, lambda = 1; jumps land at the end of their steps (0.34 and 0.5).
  const double drift = -1.25 * (1.0 - std::exp(-1.0));
  const double jumps = eps * (1.0 * std::exp(-(1.0 - 0.34)) + 0.5 * std::exp(-0.5));
  CHECK(along(*tr.final_state, e) == doctest::Approx(drift + jumps).epsilon(1e-12));
  CHECK(tr.jumps[34] == 1);
  CHECK(tr.jumps[50] == 1);
}

TEST_CASE("additive noise has the compensated mean and Poisson variance") {
  const auto g = make_grid(8);
  const auto e = (1.0 / norms(VelocityField::single_mode(g, 0, 1, 1.0)).h) * VelocityField::single_mode(g, 0, 1, 1.0);
  const MarkSpace s({1.0, 0.5});
  const NoiseCoefficient noise{{1.0, 0.5}, e, 0.0};
  const double eps = 0.5;
  auto p = params(0.01, 1.0, eps);
  const int N = 4000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < N; ++i) {
    const double a = along(*simulate(VelocityField::zero(g), p, noise, s, stream_seed(5, i)).final_state, e);
    sum += a;
    sum2 += a * a;
  }
  const double mean = sum / N, var = sum2 / N - mean * mean;
  // Var = eps sum sigma^2 nu int exp(-2(T-s)) ds
  const double var_exact = eps * 1.125 * (1.0 - std::exp(-2.0)) / 2.0;
  CHECK(std::abs(mean) < 4.0 * std::sqrt(var_exact / N));
  CHECK(var == doctest::Approx(var_exact).epsilon(0.08));
}

TEST_CASE("silent noise reproduces the deterministic solver bit for bit") {
  const auto g = make_grid(16);
  const auto u0 = random_field(8, g, 1.5, 1.0);
  const MarkSpace s({1.0, 2.0});
  const NoiseCoefficient noise{{0.0, 0.0}, random_field(9, g, 1.5, 1.0), 0.5};
  const auto p = params(1e-3, 0.2, 0.1);
  const auto a = simulate(u0, p, noise, s, 77);
  const SkeletonProblem prob{u0, p, silent_noise(g, 2), s, ControlField::unit(0.2, 2)};
  const auto b = solve_skeleton(prob);
  CHECK(*a.final_state == *b.final_state);
}

TEST_CASE("both compensator forms describe the same tilted equation") {
  const auto g = make_grid(16);
  const auto u0 = random_field(10, g, 1.5, 1.0);
  const MarkSpace s({1.0, 0.5});
  const NoiseCoefficient noise{{0.8, -0.4}, random_field(11, g, 1.5, 0.5), 0.3};
  const auto phi = ControlField::uniform(0.2, 2, 2, {2.0, 0.5, 1.5, 0.75}, 2);
  auto p = params(1e-3, 0.2, 0.25);
  const auto a = simulate(u0, p, noise, s, 4, &phi);
  p.compensation = CompensationForm::tilted_rate;
  const auto b = simulate(u0, p, noise, s, 4, &phi);
  CHECK(norms(*a.final_state - *b.final_state).h < 1e-12 * norms(*a.final_state).h);
  CHECK(a.final_log_weight() == b.final_log_weight());
}

TEST_CASE("theta cutoff above the path norm leaves the run unchanged") {
  const auto g = make_grid(16);
  const auto u0 = random_field(12, g, 1.5, 1.0);
  const MarkSpace s({1.0});
  auto p = params(1e-3, 0.2);
  const auto a = simulate(u0, p, silent_noise(g, 1), s, 1);
  p.cutoff_m = 1e6;
  const auto b = simulate(u0, p, silent_noise(g, 1), s, 1);
  CHECK(*a.final_state == *b.final_state);
  // A cutoff of zero removes the nonlinearity after the first step.
  p.cutoff_m = 0.0;
  const auto c = simulate(u0, p, silent_noise(g, 1), s, 1);
  auto q = params(1e-3, 0.2);
  q.nonlinear = false;
  const auto d = simulate(u0, q, silent_noise(g, 1), s, 1);
  CHECK(norms(*c.final_state - *d.final_state).h < 1e-12);
}

TEST_CASE("guard stops the run and non-finite states raise") {
  const auto g = make_grid(16);
  const MarkSpace s({1.0});
  auto p = params(1e-3, 0.5);
  p.guard = 0.5;
  const auto u0 = VelocityField::single_mode(g, 1, 0, 1.0);
  const auto tr = simulate(u0, p, silent_noise(g, 1), s, 1);
  CHECK(tr.status == RunStatus::guard_exceeded);
  REQUIRE(tr.blowup_time.has_value());
  CHECK(*tr.blowup_time < 0.5);
  CHECK(tr.times.back() == *tr.blowup_time);

  auto q = params(0.5, 1.0);
  const auto big = random_field(1, g, 1.5, 1e160);
  CHECK_THROWS_AS(simulate(big, q, silent_noise(g, 1), s, 1), NumericalFailure);
}

TEST_CASE("simulation is deterministic in the seed and the CSV has one row per time") {
  const auto g = make_grid(8);
  const MarkSpace s({1.0, 0.5});
  const NoiseCoefficient noise{{1.0, 0.5}, random_field(2, g, 1.5, 1.0), 0.2};
  const auto p = params(0.01, 0.5, 0.3);
  const auto a = simulate(VelocityField::zero(g), p, noise, s, 99);
  const auto b = simulate(VelocityField::zero(g), p, noise, s, 99);
  CHECK(*a.final_state == *b.final_state);
  std::ostringstream os;
  write_trajectory_csv(a, os);
  const std::string text = os.str();
  CHECK(text.rfind("t,h,v,da,jumps_this_step,log_weight_running\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 52);
}

TEST_CASE("configuration mismatches are rejected") {
  const auto g = make_grid(8);
  const MarkSpace s({1.0, 0.5});
  const NoiseCoefficient noise{{1.0}, VelocityField::zero(g), 0.0};
  CHECK_THROWS_AS(simulate(VelocityField::zero(g), params(0.01, 1.0), noise, s, 1), ConfigError);
  const NoiseCoefficient other{{1.0, 1.0}, VelocityField::zero(make_grid(16)), 0.0};
  CHECK_THROWS_AS(simulate(VelocityField::zero(g), params(0.01, 1.0), other, s, 1), ConfigError);
  const NoiseCoefficient ok{{1.0, 1.0}, VelocityField::zero(g), 0.0};
  CHECK_THROWS_AS(simulate(VelocityField::zero(g), params(0.01, 1.0, 0.0), ok, s, 1), ConfigError);
}

TEST_CASE("noise coefficient constants") {
  const auto g = make_grid(8);
  const auto b = VelocityField::single_mode(g, 1, 1, 1.0);
  const NoiseCoefficient noise{{2.0, -0.5}, b, 0.1};
  CHECK(noise.lipschitz(0) == doctest::Approx(0.2));
  CHECK(noise.growth_v(1) == doctest::Approx(0.5 * norms(b).v));
  CHECK(noise.growth_h(0) == doctest::Approx(2.0 * norms(b).h));
  CHECK(silent_noise(g, 2).silent());
  CHECK_FALSE(noise.silent());
}
