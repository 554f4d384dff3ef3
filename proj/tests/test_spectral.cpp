#include <doctest.h>

#include <cmath>
#include <numbers>

#include "jumpns/errors.hpp"
#include "jumpns/rng.hpp"
#include "jumpns/spectral.hpp"

using namespace jumpns;

namespace {

// Direct O(N^4) evaluation of -P[(u.grad)v] by summing over all wavevector pairs,
// restricted to the dealias mask, then projecting mode by mode.
CoefficientPair convolution_oracle(const VelocityField& u, const VelocityField& v) {
  const SpectralGrid& g = u.grid();
  const int n = g.n();
  const int cut = g.dealias_cutoff();
  const double s = g.kappa_scale();
  CoefficientPair w{std::vector<Complex>(g.size()), std::vector<Complex>(g.size())};
  auto at = [&](std::span<const Complex> a, int kx, int ky) {
    return a[static_cast<std::size_t>(g.index_of(ky)) * n + g.index_of(kx)];
  };
  for (int py = -n / 2 + 1; py <= n / 2; ++py) {
    for (int px = -n / 2 + 1; px <= n / 2; ++px) {
      const Complex ux = at(u.x(), px, py), uy = at(u.y(), px, py);
      if (ux == 0.0 && uy == 0.0) continue;
      for (int qy = -n / 2 + 1; qy <= n / 2; ++qy) {
        for (int qx = -n / 2 + 1; qx <= n / 2; ++qx) {
          const int kx = px + qx, ky = py + qy;
          if (std::abs(kx) > cut || std::abs(ky) > cut) continue;
          // (u.grad) applied to exp(i q.x): i (u . q) s
          const Complex adv = Complex(0.0, s) * (ux * static_cast<double>(qx) + uy * static_cast<double>(qy));
          const auto f = static_cast<std::size_t>(g.index_of(ky)) * n + g.index_of(kx);
          w.x[f] += adv * at(v.x(), qx, qy);
          w.y[f] += adv * at(v.y(), qx, qy);
        }
      }
    }
  }
  for (int ky = -n / 2 + 1; ky <= n / 2; ++ky) {
    for (int kx = -n / 2 + 1; kx <= n / 2; ++kx) {
      const auto f = static_cast<std::size_t>(g.index_of(ky)) * n + g.index_of(kx);
      const double k2 = static_cast<double>(kx * kx + ky * ky);
      if (k2 == 0.0) {
        w.x[f] = w.y[f] = 0.0;
        continue;
      }
      const Complex dot = (static_cast<double>(kx) * w.x[f] + static_cast<double>(ky) * w.y[f]) / k2;
      w.x[f] = -(w.x[f] - static_cast<double>(kx) * dot);
      w.y[f] = -(w.y[f] - static_cast<double>(ky) * dot);
    }
  }
  return w;
}

double max_abs(std::span<const Complex> a) {
  double m = 0.0;
  for (auto z : a) m = std::max(m, std::abs(z));
  return m;
}

}  // namespace

TEST_CASE("grid construction rejects odd and tiny grids") {
  CHECK_THROWS_AS(SpectralGrid::make(7), ConfigError);
  CHECK_THROWS_AS(SpectralGrid::make(6), ConfigError);
  CHECK_THROWS_AS(SpectralGrid::make(8, -1.0), ConfigError);
  const auto g = SpectralGrid::make(32);
  CHECK(g.dealias_cutoff() == 10);
  CHECK(g.wavenumber(16) == 16);
  CHECK(g.wavenumber(17) == -15);
  CHECK(g.index_of(-15) == 17);
  CHECK(g.kappa_scale() == doctest::Approx(1.0));
}

TEST_CASE("Stokes operator on a single mode has eigenvalue |k|^2") {
  const auto g = make_grid(16);
  const auto u = VelocityField::single_mode(g, 2, 1, 0.7);
  const auto au = apply_stokes(u);
  const auto diff = au - 5.0 * u;
  CHECK(norms(diff).h < 1e-14);
  const auto nt = norms(u);
  CHECK(nt.v == doctest::Approx(std::sqrt(5.0) * nt.h).epsilon(1e-14));
  CHECK(nt.da == doctest::Approx(5.0 * nt.h).epsilon(1e-14));
  // |a cos(k.x)|_L2^2 = a^2 (2 pi)^2 / 2
  CHECK(nt.h == doctest::Approx(0.7 * 2.0 * std::numbers::pi / std::sqrt(2.0)).epsilon(1e-13));
}

TEST_CASE("domain length rescales the Stokes eigenvalue") {
  const auto g = SpectralGrid::make(16, 1.0);
  const auto u = VelocityField::single_mode(g, 1, 0, 1.0);
  const double k2 = 4.0 * std::numbers::pi * std::numbers::pi;
  CHECK(norms(apply_stokes(u) - k2 * u).h < 1e-12 * k2);
}

TEST_CASE("Leray projection is idempotent and yields real solenoidal fields") {
  const auto g = make_grid(16);
  RandomStream rng(11);
  CoefficientPair raw{std::vector<Complex>(g.size()), std::vector<Complex>(g.size())};
  for (auto& z : raw.x) z = Complex(rng.normal(), rng.normal());
  for (auto& z : raw.y) z = Complex(rng.normal(), rng.normal());
  const auto p = leray_project(g, raw);
  CHECK(p.max_divergence() < 1e-12);
  const auto pp = leray_project(p);
  CHECK(pp == p);
  const auto r = random_field(5, g, 1.5, 1.0);
  CHECK(r.max_hermitian_defect() == 0.0);
  CHECK(r.max_divergence() < 1e-13);
  CHECK(leray_project(r) == r);
}

TEST_CASE("random fields are deterministic, dealiased and zero at zero amplitude") {
  const auto g = make_grid(16);
  CHECK(random_field(3, g, 2.0, 1.0) == random_field(3, g, 2.0, 1.0));
  CHECK_FALSE(random_field(3, g, 2.0, 1.0) == random_field(4, g, 2.0, 1.0));
  CHECK(dealias(random_field(3, g, 2.0, 1.0)) == random_field(3, g, 2.0, 1.0));
  CHECK(norms(random_field(3, g, 2.0, 0.0)).h == 0.0);
  CHECK_THROWS_AS(random_field(3, g, 1.0, 1.0), ConfigError);
}

TEST_CASE("Parseval: spectral and physical H norms agree") {
  const auto g = make_grid(32);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto u = random_field(s, g, 1.5, 2.0);
    CHECK(physical_h_norm(u) == doctest::Approx(norms(u).h).epsilon(1e-12));
  }
}

TEST_CASE("pseudospectral bilinear form matches the direct convolution at n = 8") {
  const auto g = make_grid(8);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto u = random_field(stream_seed(s, 0), g, 1.2, 1.0);
    const auto v = random_field(stream_seed(s, 1), g, 1.2, 1.0);
    const auto b = bilinear(u, v);
    const auto ref = convolution_oracle(u, v);
    const double scale = std::max(max_abs(ref.x), max_abs(ref.y));
    REQUIRE(scale > 0.0);
    double err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      err = std::max(err, std::abs(b.x()[i] - ref.x[i]));
      err = std::max(err, std::abs(b.y()[i] - ref.y[i]));
    }
    CHECK(err / scale < 1e-10);
  }
}

TEST_CASE("bilinear form is antisymmetric in its last two arguments") {
  const auto g = make_grid(32);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto u = random_field(stream_seed(s, 0), g, 1.5, 1.0);
    const auto v = random_field(stream_seed(s, 1), g, 1.5, 1.0);
    const auto z = random_field(stream_seed(s, 2), g, 1.5, 1.0);
    const auto nu = norms(u), nv = norms(v), nz = norms(z);
    CHECK(std::abs(inner_h(bilinear(u, v), v)) <= 1e-10 * nu.v * nv.v * nv.v);
    CHECK(std::abs(inner_h(bilinear(u, v), z) + inner_h(bilinear(u, z), v)) <= 1e-10 * nu.v * nv.v * nz.v);
  }
}

TEST_CASE("bilinear form vanishes on a single shear mode") {
  const auto g = make_grid(16);
  const auto u = VelocityField::single_mode(g, 1, 0, 1.3);
  CHECK(norms(bilinear(u, u)).h < 1e-14);
}

TEST_CASE("grid mismatch is a configuration error") {
  const auto a = VelocityField::single_mode(make_grid(8), 1, 0, 1.0);
  const auto b = VelocityField::single_mode(make_grid(16), 1, 0, 1.0);
  CHECK_THROWS_AS(bilinear(a, b), ConfigError);
  CHECK_THROWS_AS(inner_h(a, b), ConfigError);
}

TEST_CASE("Ladyzhenskaya inequality with constant 2") {
  const auto g = make_grid(32);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto u = random_field(s, g, 1.1 + 0.1 * static_cast<double>(s % 5), 1.0);
    const double l4 = l4_norm(u);
    const auto nt = norms(u);
    CHECK(std::pow(l4, 4) <= 2.0 * nt.h * nt.h * nt.v * nt.v * (1.0 + 1e-6));
  }
}

TEST_CASE("L4 quadrature is exact for a single mode") {
  // |a cos|^4 integrates to a^4 (3/8) (2 pi)^2
  const auto g = make_grid(16);
  const auto u = VelocityField::single_mode(g, 0, 3, 1.5);
  const double expected = std::pow(1.5, 4) * 3.0 / 8.0 * 4.0 * std::numbers::pi * std::numbers::pi;
  CHECK(std::pow(l4_norm(u), 4) == doctest::Approx(expected).epsilon(1e-12));
}
