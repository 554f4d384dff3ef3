#include "app/oracles.hpp"

#include <cmath>
#include <cstdlib>

namespace jumpns::app {

CoefficientPair convolution_oracle(const VelocityField& u, const VelocityField& v) {
  const SpectralGrid& g = u.grid();
  const int n = g.n();
  const int cut = g.dealias_cutoff();
  const double s = g.kappa_scale();
  CoefficientPair w{std::vector<Complex>(g.size()), std::vector<Complex>(g.size())};
  auto flat = [&](int kx, int ky) { return static_cast<std::size_t>(g.index_of(ky)) * n + g.index_of(kx); };
  for (int py = -n / 2 + 1; py <= n / 2; ++py) {
    for (int px = -n / 2 + 1; px <= n / 2; ++px) {
      const Complex ux = u.x()[flat(px, py)], uy = u.y()[flat(px, py)];
      if (ux == 0.0 && uy == 0.0) continue;
      for (int qy = -n / 2 + 1; qy <= n / 2; ++qy) {
        for (int qx = -n / 2 + 1; qx <= n / 2; ++qx) {
          const int kx = px + qx, ky = py + qy;
          if (std::abs(kx) > cut || std::abs(ky) > cut) continue;
          // (u.grad) exp(i q.x) = i s (u.q) exp(i q.x)
          const Complex adv = Complex(0.0, s) * (ux * static_cast<double>(qx) + uy * static_cast<double>(qy));
          w.x[flat(kx, ky)] += adv * v.x()[flat(qx, qy)];
          w.y[flat(kx, ky)] += adv * v.y()[flat(qx, qy)];
        }
      }
    }
  }
  for (int ky = -n / 2 + 1; ky <= n / 2; ++ky) {
    for (int kx = -n / 2 + 1; kx <= n / 2; ++kx) {
      const auto f = flat(kx, ky);
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

double entropy_quadrature(const ControlField& g, const MarkSpace& space, int cells) {
  const double h = g.horizon() / cells;
  double acc = 0.0;
  for (int c = 0; c < cells; ++c) {
    const double t = (c + 0.5) * h;
    for (std::size_t j = 0; j < space.size(); ++j) {
      const double x = g(t, j);
      acc += h * space.weight(j) * (x * std::log(x) - x + 1.0);
    }
  }
  return acc;
}

}  // namespace jumpns::app
