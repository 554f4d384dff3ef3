#include <doctest.h>

#include <cmath>

#include "jumpns/errors.hpp"
#include "jumpns/skeleton.hpp"

using namespace jumpns;

namespace {

SkeletonProblem additive_problem(const SpectralGrid& g, const ControlField& control) {
  const auto mode = VelocityField::single_mode(g, 1, 0, 1.0);
  SkeletonProblem p{VelocityField::zero(g), {}, {{1.0, 0.5}, (1.0 / norms(mode).h) * mode, 0.0},
                    MarkSpace({1.0, 0.5}), control};
  p.params.dt = 1e-3;
  p.params.horizon = 1.0;
  return p;
}

SkeletonProblem generic_problem(int n) {
  const auto g = make_grid(n);
  SkeletonProblem p{random_field(31, g, 1.5, 1.0), {}, {{1.0, -0.5}, random_field(32, g, 2.0, 0.005), 0.01},
                    MarkSpace({1.0, 0.5}), ControlField::unit(0.5, 2)};
  p.params.dt = 1e-3;
  p.params.horizon = 0.5;
  return p;
}

}  // namespace

TEST_CASE("unit control reproduces the uncontrolled deterministic run") {
  auto p = generic_problem(16);
  const auto a = solve_skeleton(p);
  auto q = p;
  q.noise.sigma = {0.0, 0.0};
  q.g = ControlField::constant(0.5, 2, 3.0, 3);
  const auto b = solve_skeleton(q);
  CHECK(*a.final_state == *b.final_state);
  CHECK(a.times.size() == 501);
}

TEST_CASE("shifted drift for additive noise matches the closed form") {
  const auto g = make_grid(8);
  const auto control = ControlField::uniform(1.0, 2, 2, {2.0, 0.5, 0.5, 3.0}, 3);
  const auto p = additive_problem(g, control);
  const auto tr = solve_skeleton(p);
  // a' = -a + c_i on interval i, c_i = sum_j sigma_j (g_ij - 1) nu_j
  const double c0 = 1.0 * 1.0 * 1.0 + 0.5 * -0.5 * 0.5;
  const double c1 = 1.0 * -0.5 * 1.0 + 0.5 * 2.0 * 0.5;
  const double a_half = c0 * (1.0 - std::exp(-0.5));
  const double a_end = a_half * std::exp(-0.5) + c1 * (1.0 - std::exp(-0.5));
  CHECK(inner_h(*tr.final_state, p.noise.base) == doctest::Approx(a_end).epsilon(1e-12));

  const auto d = shifted_drift(p.noise.base, p.noise, control, 0.25, p.space);
  CHECK(inner_h(d, p.noise.base) == doctest::Approx(c0).epsilon(1e-14));
}

TEST_CASE("mismatched controls are rejected") {
  const auto g = make_grid(8);
  auto p = additive_problem(g, ControlField::unit(1.0, 3));
  CHECK_THROWS_AS(solve_skeleton(p), ConfigError);
}

TEST_CASE("Upsilon-V distance of a run to itself is zero and needs full snapshots") {
  auto p = generic_problem(8);
  p.params.snapshot_stride = 1;
  const auto a = solve_skeleton(p);
  CHECK(upsilon_v_distance(a, a) == 0.0);
  p.params.snapshot_stride = 0;
  const auto b = solve_skeleton(p);
  CHECK_THROWS_AS(upsilon_v_distance(b, b), ConfigError);
}

TEST_CASE("continuity probe distances decrease like 1/n^2") {
  auto p = generic_problem(16);
  const std::vector<double> h{0.6, -0.4, -0.5, 0.3};
  std::vector<ControlField> seq;
  const std::vector<int> ns{1, 2, 4, 8, 16, 32, 64};
  for (int n : ns) {
    std::vector<double> v(h.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 + h[i] / n;
    seq.push_back(ControlField::uniform(0.5, 2, 2, v, ControlField::required_bound(v)));
  }
  const auto d = skeleton_continuity_probe(seq, ControlField::unit(0.5, 2), p);
  for (std::size_t i = 1; i < d.size(); ++i) {
    CHECK(d[i] < d[i - 1]);
    CHECK(d[i - 1] / d[i] == doctest::Approx(4.0).epsilon(0.05));
  }
  CHECK(d.back() < 1e-6);
}
