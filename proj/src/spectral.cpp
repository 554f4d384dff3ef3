#include "jumpns/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>

#include "jumpns/errors.hpp"
#include "jumpns/rng.hpp"

namespace jumpns {

namespace detail {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

/// In-place-capable complex 2-D transform pair of one size. Plans are built
/// once and executed through the new-array interface, which is thread-safe.
class FftPair {
 public:
  explicit FftPair(int m) : m_(m) {
    std::lock_guard lock(planner_mutex());
    std::vector<Complex> scratch(static_cast<std::size_t>(m) * m);
    auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    forward_ = fftw_plan_dft_2d(m, m, p, p, FFTW_FORWARD, flags);
    backward_ = fftw_plan_dft_2d(m, m, p, p, FFTW_BACKWARD, flags);
  }
  FftPair(const FftPair&) = delete;
  FftPair& operator=(const FftPair&) = delete;
  ~FftPair() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }

  int size() const { return m_; }

  /// Unnormalized sum_x f(x) e^{-ik.x}.
  void forward(std::vector<Complex>& a) const {
    auto* p = reinterpret_cast<fftw_complex*>(a.data());
    fftw_execute_dft(forward_, p, p);
  }
  /// sum_k f(k) e^{+ik.x}.
  void backward(std::vector<Complex>& a) const {
    auto* p = reinterpret_cast<fftw_complex*>(a.data());
    fftw_execute_dft(backward_, p, p);
  }

 private:
  int m_;
  fftw_plan forward_{};
  fftw_plan backward_{};
};

struct GridImpl {
  int n = 0;
  double length = 0.0;
  double fraction = 0.0;
  int cutoff = 0;
  std::vector<std::uint8_t> mask;
  std::vector<double> ksq;
  std::unique_ptr<FftPair> fft;
  std::unique_ptr<FftPair> fft_padded;  // 2n, used for exact quartic quadrature
};

}  // namespace detail

using detail::GridImpl;

SpectralGrid SpectralGrid::make(int n_modes, double domain_length, double dealias_fraction) {
  if (n_modes < 8 || n_modes % 2 != 0) {
    throw ConfigError("n_modes must be an even integer >= 8, got " + std::to_string(n_modes));
  }
  if (!(domain_length > 0.0) || !std::isfinite(domain_length)) {
    throw ConfigError("domain_length must be positive");
  }
  if (!(dealias_fraction > 0.0 && dealias_fraction <= 1.0)) {
    throw ConfigError("dealias_fraction must lie in (0, 1]");
  }
  auto impl = std::make_shared<GridImpl>();
  impl->n = n_modes;
  impl->length = domain_length;
  impl->fraction = dealias_fraction;
  // Modes with |k| > fraction * n/2 are zeroed. The small epsilon keeps
  // exact products like (2/3) * 12 / 2 = 4 from rounding below the integer.
  impl->cutoff = static_cast<int>(std::floor(dealias_fraction * n_modes / 2.0 + 1e-9));
  const double scale = 2.0 * std::numbers::pi / domain_length;
  const auto total = static_cast<std::size_t>(n_modes) * n_modes;
  impl->mask.resize(total);
  impl->ksq.resize(total);
  auto wn = [n_modes](int i) { return i <= n_modes / 2 ? i : i - n_modes; };
  for (int iy = 0; iy < n_modes; ++iy) {
    for (int ix = 0; ix < n_modes; ++ix) {
      const auto f = static_cast<std::size_t>(iy) * n_modes + ix;
      const int kx = wn(ix);
      const int ky = wn(iy);
      impl->mask[f] = (std::abs(kx) <= impl->cutoff && std::abs(ky) <= impl->cutoff) ? 1 : 0;
      impl->ksq[f] = scale * scale * (static_cast<double>(kx) * kx + static_cast<double>(ky) * ky);
    }
  }
  impl->fft = std::make_unique<detail::FftPair>(n_modes);
  impl->fft_padded = std::make_unique<detail::FftPair>(2 * n_modes);
  return SpectralGrid(std::move(impl));
}

int SpectralGrid::n() const { return impl_->n; }
double SpectralGrid::length() const { return impl_->length; }
double SpectralGrid::dealias_fraction() const { return impl_->fraction; }
double SpectralGrid::kappa_scale() const { return 2.0 * std::numbers::pi / impl_->length; }
int SpectralGrid::dealias_cutoff() const { return impl_->cutoff; }
bool SpectralGrid::retained(std::size_t flat) const { return impl_->mask[flat] != 0; }
double SpectralGrid::kappa_sq(std::size_t flat) const { return impl_->ksq[flat]; }

bool operator==(const SpectralGrid& a, const SpectralGrid& b) {
  if (a.impl_ == b.impl_) return true;
  return a.n() == b.n() && a.length() == b.length() && a.dealias_fraction() == b.dealias_fraction();
}

SpectralGrid make_grid(int n_modes, double domain_length) {
  return SpectralGrid::make(n_modes, domain_length);
}

// ---------------------------------------------------------------------------

namespace {

void require_same_grid(const SpectralGrid& a, const SpectralGrid& b, const char* op) {
  if (!(a == b)) throw ConfigError(std::string(op) + ": grid mismatch");
}

void check_shape(const SpectralGrid& grid, const CoefficientPair& c) {
  if (c.x.size() != grid.size() || c.y.size() != grid.size()) {
    throw ConfigError("coefficient array shape does not match the grid");
  }
}

constexpr double kSolenoidalTol = 1e-14;

/// Projects in place: zero mean, zero Nyquist, u_hat <- u_hat - k (k.u_hat)/|k|^2.
void project_in_place(const SpectralGrid& grid, CoefficientPair& c) {
  const int n = grid.n();
  for (int iy = 0; iy < n; ++iy) {
    const int ky = grid.wavenumber(iy);
    for (int ix = 0; ix < n; ++ix) {
      const int kx = grid.wavenumber(ix);
      const auto f = static_cast<std::size_t>(iy) * n + ix;
      if ((kx == 0 && ky == 0) || ix == n / 2 || iy == n / 2) {
        c.x[f] = 0.0;
        c.y[f] = 0.0;
        continue;
      }
      const double k2 = static_cast<double>(kx) * kx + static_cast<double>(ky) * ky;
      const Complex dot = static_cast<double>(kx) * c.x[f] + static_cast<double>(ky) * c.y[f];
      // Modes that are solenoidal to round-off are left untouched, which
      // makes the projection exactly idempotent.
      const double scale = std::sqrt(k2 * (std::norm(c.x[f]) + std::norm(c.y[f])));
      if (std::abs(dot) <= kSolenoidalTol * scale) continue;
      c.x[f] -= static_cast<double>(kx) * dot / k2;
      c.y[f] -= static_cast<double>(ky) * dot / k2;
    }
  }
}

}  // namespace

VelocityField::VelocityField(SpectralGrid grid) : grid_(std::move(grid)) {
  c_.x.assign(grid_.size(), Complex{});
  c_.y.assign(grid_.size(), Complex{});
}

VelocityField::VelocityField(SpectralGrid grid, CoefficientPair coeffs)
    : grid_(std::move(grid)), c_(std::move(coeffs)) {
  check_shape(grid_, c_);
}

VelocityField VelocityField::single_mode(const SpectralGrid& grid, int kx, int ky,
                                         double amplitude) {
  if (kx == 0 && ky == 0) throw ConfigError("single_mode: wavevector must be nonzero");
  const int n = grid.n();
  if (std::abs(kx) >= n / 2 || std::abs(ky) >= n / 2) {
    throw ConfigError("single_mode: wavevector outside the resolved lattice");
  }
  VelocityField u(grid);
  const double norm = std::hypot(static_cast<double>(kx), static_cast<double>(ky));
  const double dx = -ky / norm;
  const double dy = kx / norm;
  const auto plus = static_cast<std::size_t>(grid.index_of(ky)) * n + grid.index_of(kx);
  const auto minus = static_cast<std::size_t>(grid.index_of(-ky)) * n + grid.index_of(-kx);
  u.c_.x[plus] = 0.5 * amplitude * dx;
  u.c_.y[plus] = 0.5 * amplitude * dy;
  u.c_.x[minus] = 0.5 * amplitude * dx;
  u.c_.y[minus] = 0.5 * amplitude * dy;
  return u;
}

VelocityField& VelocityField::operator+=(const VelocityField& o) { return axpy(1.0, o); }

VelocityField& VelocityField::operator-=(const VelocityField& o) {
  require_same_grid(grid_, o.grid_, "operator-=");
  for (std::size_t i = 0; i < c_.x.size(); ++i) {
    c_.x[i] -= o.c_.x[i];
    c_.y[i] -= o.c_.y[i];
  }
  return *this;
}

VelocityField& VelocityField::operator*=(double s) {
  for (std::size_t i = 0; i < c_.x.size(); ++i) {
    c_.x[i] *= s;
    c_.y[i] *= s;
  }
  return *this;
}

VelocityField& VelocityField::axpy(double s, const VelocityField& o) {
  require_same_grid(grid_, o.grid_, "axpy");
  if (s == 1.0) {
    for (std::size_t i = 0; i < c_.x.size(); ++i) {
      c_.x[i] += o.c_.x[i];
      c_.y[i] += o.c_.y[i];
    }
  } else {
    for (std::size_t i = 0; i < c_.x.size(); ++i) {
      c_.x[i] += s * o.c_.x[i];
      c_.y[i] += s * o.c_.y[i];
    }
  }
  return *this;
}

bool operator==(const VelocityField& a, const VelocityField& b) {
  return a.grid_ == b.grid_ && a.c_.x == b.c_.x && a.c_.y == b.c_.y;
}

bool VelocityField::all_finite() const {
  auto finite = [](const Complex& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); };
  return std::all_of(c_.x.begin(), c_.x.end(), finite) &&
         std::all_of(c_.y.begin(), c_.y.end(), finite);
}

double VelocityField::max_divergence() const {
  const int n = grid_.n();
  const double s = grid_.kappa_scale();
  double worst = 0.0;
  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) {
      const auto f = static_cast<std::size_t>(iy) * n + ix;
      const Complex d = s * (static_cast<double>(grid_.wavenumber(ix)) * c_.x[f] + static_cast<double>(grid_.wavenumber(iy)) * c_.y[f]);
      worst = std::max(worst, std::abs(d));
    }
  }
  return worst;
}

double VelocityField::max_hermitian_defect() const {
  const int n = grid_.n();
  double worst = 0.0;
  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) {
      if (ix == n / 2 || iy == n / 2) continue;
      const auto f = static_cast<std::size_t>(iy) * n + ix;
      const auto g = static_cast<std::size_t>(grid_.index_of(-grid_.wavenumber(iy))) * n +
                     grid_.index_of(-grid_.wavenumber(ix));
      worst = std::max(worst, std::abs(c_.x[g] - std::conj(c_.x[f])));
      worst = std::max(worst, std::abs(c_.y[g] - std::conj(c_.y[f])));
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------

VelocityField leray_project(const SpectralGrid& grid, CoefficientPair raw) {
  check_shape(grid, raw);
  project_in_place(grid, raw);
  return VelocityField(grid, std::move(raw));
}

VelocityField leray_project(const VelocityField& u) {
  return leray_project(u.grid(), u.coeffs());
}

VelocityField apply_stokes(const VelocityField& u) {
  const auto& grid = u.grid();
  CoefficientPair c = u.coeffs();
  for (std::size_t f = 0; f < grid.size(); ++f) {
    c.x[f] *= grid.kappa_sq(f);
    c.y[f] *= grid.kappa_sq(f);
  }
  return VelocityField(grid, std::move(c));
}

VelocityField dealias(const VelocityField& u) {
  const auto& grid = u.grid();
  CoefficientPair c = u.coeffs();
  for (std::size_t f = 0; f < grid.size(); ++f) {
    if (!grid.retained(f)) {
      c.x[f] = 0.0;
      c.y[f] = 0.0;
    }
  }
  return VelocityField(grid, std::move(c));
}

namespace {

/// Physical samples of i*kx*a (dir 0) or i*ky*a (dir 1), or a itself (dir -1).
std::vector<Complex> synthesize(const SpectralGrid& grid, std::span<const Complex> a, int dir) {
  const int n = grid.n();
  const double s = grid.kappa_scale();
  std::vector<Complex> out(a.begin(), a.end());
  if (dir >= 0) {
    for (int iy = 0; iy < n; ++iy) {
      for (int ix = 0; ix < n; ++ix) {
        const auto f = static_cast<std::size_t>(iy) * n + ix;
        const double k = s * (dir == 0 ? grid.wavenumber(ix) : grid.wavenumber(iy));
        out[f] *= Complex(0.0, k);
      }
    }
  }
  grid.impl().fft->backward(out);
  return out;
}

}  // namespace

VelocityField bilinear(const VelocityField& u, const VelocityField& v) {
  require_same_grid(u.grid(), v.grid(), "bilinear");
  const auto& grid = u.grid();
  const std::size_t total = grid.size();

  const auto ux = synthesize(grid, u.x(), -1);
  const auto uy = synthesize(grid, u.y(), -1);
  const auto dxvx = synthesize(grid, v.x(), 0);
  const auto dyvx = synthesize(grid, v.x(), 1);
  const auto dxvy = synthesize(grid, v.y(), 0);
  const auto dyvy = synthesize(grid, v.y(), 1);

  CoefficientPair w;
  w.x.resize(total);
  w.y.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    // Fields are real; discard round-off imaginary parts before the product.
    const double a = ux[i].real();
    const double b = uy[i].real();
    w.x[i] = a * dxvx[i].real() + b * dyvx[i].real();
    w.y[i] = a * dxvy[i].real() + b * dyvy[i].real();
  }
  grid.impl().fft->forward(w.x);
  grid.impl().fft->forward(w.y);
  const double inv = -1.0 / static_cast<double>(total);
  for (std::size_t f = 0; f < total; ++f) {
    if (grid.retained(f)) {
      w.x[f] *= inv;
      w.y[f] *= inv;
    } else {
      w.x[f] = 0.0;
      w.y[f] = 0.0;
    }
  }
  project_in_place(grid, w);
  return VelocityField(grid, std::move(w));
}

double inner_h(const VelocityField& u, const VelocityField& v) {
  require_same_grid(u.grid(), v.grid(), "inner_h");
  double acc = 0.0;
  const auto ux = u.x(), uy = u.y(), vx = v.x(), vy = v.y();
  for (std::size_t f = 0; f < ux.size(); ++f) {
    acc += (ux[f] * std::conj(vx[f])).real() + (uy[f] * std::conj(vy[f])).real();
  }
  const double L = u.grid().length();
  return L * L * acc;
}

NormTriple norms(const VelocityField& u) {
  const auto& grid = u.grid();
  double h2 = 0.0, v2 = 0.0, a2 = 0.0;
  const auto ux = u.x(), uy = u.y();
  for (std::size_t f = 0; f < ux.size(); ++f) {
    const double m = std::norm(ux[f]) + std::norm(uy[f]);
    const double k2 = grid.kappa_sq(f);
    h2 += m;
    v2 += k2 * m;
    a2 += k2 * k2 * m;
  }
  const double L2 = grid.length() * grid.length();
  return {std::sqrt(L2 * h2), std::sqrt(L2 * v2), std::sqrt(L2 * a2)};
}

PhysicalField to_physical(const VelocityField& u, int m) {
  const auto& grid = u.grid();
  const int n = grid.n();
  if (m == 0) m = n;
  if (m != n && m != 2 * n) throw ConfigError("to_physical: only n or 2n resolution supported");
  const detail::FftPair& fft = (m == n) ? *grid.impl().fft : *grid.impl().fft_padded;
  PhysicalField out;
  out.m = m;
  auto render = [&](std::span<const Complex> a) {
    std::vector<Complex> buf(static_cast<std::size_t>(m) * m);
    for (int iy = 0; iy < n; ++iy) {
      for (int ix = 0; ix < n; ++ix) {
        const int kx = grid.wavenumber(ix);
        const int ky = grid.wavenumber(iy);
        const auto jx = ((kx % m) + m) % m;
        const auto jy = ((ky % m) + m) % m;
        buf[static_cast<std::size_t>(jy) * m + jx] = a[static_cast<std::size_t>(iy) * n + ix];
      }
    }
    fft.backward(buf);
    std::vector<double> re(buf.size());
    std::transform(buf.begin(), buf.end(), re.begin(), [](const Complex& z) { return z.real(); });
    return re;
  };
  out.ux = render(u.x());
  out.uy = render(u.y());
  return out;
}

double physical_h_norm(const VelocityField& u) {
  const auto p = to_physical(u);
  const double cell = u.grid().length() / p.m;
  double acc = 0.0;
  for (std::size_t i = 0; i < p.ux.size(); ++i) acc += p.ux[i] * p.ux[i] + p.uy[i] * p.uy[i];
  return std::sqrt(acc * cell * cell);
}

double l4_norm(const VelocityField& u) {
  const auto p = to_physical(u, 2 * u.grid().n());
  const double cell = u.grid().length() / p.m;
  double acc = 0.0;
  for (std::size_t i = 0; i < p.ux.size(); ++i) {
    const double s = p.ux[i] * p.ux[i] + p.uy[i] * p.uy[i];
    acc += s * s;
  }
  return std::pow(acc * cell * cell, 0.25);
}

VelocityField random_field(std::uint64_t seed, const SpectralGrid& grid, double spectrum_decay,
                           double amplitude) {
  if (!(spectrum_decay > 1.0)) throw ConfigError("random_field: spectrum_decay must exceed 1");
  VelocityField u(grid);
  if (amplitude == 0.0) return u;
  CoefficientPair c = u.coeffs();
  RandomStream rng(seed);
  const int n = grid.n();
  const int kc = grid.dealias_cutoff();
  // Visit one representative of each +-k pair in a fixed order: ky > 0, or ky == 0 and kx > 0.
  for (int ky = 0; ky <= kc; ++ky) {
    for (int kx = -kc; kx <= kc; ++kx) {
      if (ky == 0 && kx <= 0) continue;
      if (std::abs(kx) >= n / 2 || ky >= n / 2) continue;
      const double kn = std::hypot(static_cast<double>(kx), static_cast<double>(ky));
      const double mag = amplitude * std::pow(kn, -spectrum_decay);
      const Complex a = mag * Complex(rng.normal(), rng.normal()) / std::numbers::sqrt2;
      const double dx = -ky / kn;
      const double dy = kx / kn;
      const auto plus = static_cast<std::size_t>(grid.index_of(ky)) * n + grid.index_of(kx);
      const auto minus = static_cast<std::size_t>(grid.index_of(-ky)) * n + grid.index_of(-kx);
      c.x[plus] = a * dx;
      c.y[plus] = a * dy;
      c.x[minus] = std::conj(a) * dx;
      c.y[minus] = std::conj(a) * dy;
    }
  }
  return VelocityField(grid, std::move(c));
}

}  // namespace jumpns
