#pragma once

// Divergence-free velocity fields on the periodic torus [0, L)^2 stored as
// Fourier coefficients, with the Stokes operator, Leray projection, the
// advection bilinear form and the H / V / D(A) norms.
//
// Conventions
// -----------
// u(x) = sum_k u_hat(k) exp(i k.x 2pi/L), k in {-n/2+1, ..., n/2}^2.
// Norms include the domain measure L^2, so that they are the true integrals:
//   |u|_H^2    = L^2 sum |u_hat(k)|^2
//   |u|_V^2    = L^2 sum |kappa|^2 |u_hat(k)|^2
//   |u|_D(A)^2 = L^2 sum |kappa|^4 |u_hat(k)|^2
// with kappa = k 2pi/L the physical wavenumber. For L = 2pi the smallest
// nonzero |kappa|^2 is 1 and h <= v <= da holds for every mean-free field.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

namespace jumpns {

using Complex = std::complex<double>;

namespace detail {
struct GridImpl;
}

class SpectralGrid {
 public:
  /// Throws ConfigError unless n_modes is even and >= 8 and domain_length > 0.
  static SpectralGrid make(int n_modes, double domain_length = 2.0 * std::numbers::pi,
                           double dealias_fraction = 2.0 / 3.0);

  int n() const;
  double length() const;
  double dealias_fraction() const;
  std::size_t size() const { return static_cast<std::size_t>(n()) * static_cast<std::size_t>(n()); }

  /// Signed integer wavenumber of a storage index along one axis.
  int wavenumber(int index) const {
    const int m = n();
    return index <= m / 2 ? index : index - m;
  }
  /// Storage index of a signed wavenumber (inverse of wavenumber()).
  int index_of(int k) const {
    const int m = n();
    return ((k % m) + m) % m;
  }
  /// 2 pi / L.
  double kappa_scale() const;
  /// Largest |k| per axis kept by the dealias mask.
  int dealias_cutoff() const;
  /// Dealias mask at flattened storage index iy * n + ix.
  bool retained(std::size_t flat) const;
  bool retained(int ix, int iy) const {
    return retained(static_cast<std::size_t>(iy) * static_cast<std::size_t>(n()) +
                    static_cast<std::size_t>(ix));
  }
  /// |kappa|^2 at flattened index.
  double kappa_sq(std::size_t flat) const;
  /// Count of positive wavenumbers representable per axis (n/2).
  int positive_wavenumbers() const { return n() / 2; }

  friend bool operator==(const SpectralGrid& a, const SpectralGrid& b);

  const detail::GridImpl& impl() const { return *impl_; }

 private:
  explicit SpectralGrid(std::shared_ptr<const detail::GridImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const detail::GridImpl> impl_;
};

/// Real physical-space samples of a 2-D vector field on an m x m collocation grid.
struct PhysicalField {
  int m = 0;
  std::vector<double> ux;
  std::vector<double> uy;
};

/// Two-component Fourier coefficient array. Storage is row-major iy * n + ix.
struct CoefficientPair {
  std::vector<Complex> x;
  std::vector<Complex> y;
};

class VelocityField {
 public:
  explicit VelocityField(SpectralGrid grid);
  /// Wraps coefficients as-is; the caller guarantees the field invariants
  /// (use leray_project to enforce them on arbitrary data).
  VelocityField(SpectralGrid grid, CoefficientPair coeffs);

  static VelocityField zero(const SpectralGrid& grid) { return VelocityField(grid); }
  /// Real divergence-free shear/Taylor-Green mode with wavevector (kx, ky):
  /// u(x) = amplitude * (-ky, kx)/|k| * cos(k.x 2pi/L).
  static VelocityField single_mode(const SpectralGrid& grid, int kx, int ky, double amplitude);

  const SpectralGrid& grid() const { return grid_; }
  const CoefficientPair& coeffs() const { return c_; }
  std::span<const Complex> x() const { return c_.x; }
  std::span<const Complex> y() const { return c_.y; }

  VelocityField& operator+=(const VelocityField& o);
  VelocityField& operator-=(const VelocityField& o);
  VelocityField& operator*=(double s);
  /// this += s * o
  VelocityField& axpy(double s, const VelocityField& o);

  friend VelocityField operator+(VelocityField a, const VelocityField& b) { return a += b; }
  friend VelocityField operator-(VelocityField a, const VelocityField& b) { return a -= b; }
  friend VelocityField operator*(double s, VelocityField a) { return a *= s; }

  /// Bitwise equality of all coefficients.
  friend bool operator==(const VelocityField& a, const VelocityField& b);

  bool all_finite() const;
  /// max_k |k . u_hat(k)| in physical wavenumbers.
  double max_divergence() const;
  /// max_k |u_hat(-k) - conj(u_hat(k))|, Nyquist rows/columns excluded.
  double max_hermitian_defect() const;

 private:
  SpectralGrid grid_;
  CoefficientPair c_;
};

struct NormTriple {
  double h = 0.0;
  double v = 0.0;
  double da = 0.0;
};

SpectralGrid make_grid(int n_modes, double domain_length = 2.0 * std::numbers::pi);

/// Projects raw coefficients onto divergence-free mean-free fields. The
/// Nyquist row and column are zeroed since they cannot carry a real
/// divergence-free mode. Idempotent.
VelocityField leray_project(const SpectralGrid& grid, CoefficientPair raw);
VelocityField leray_project(const VelocityField& u);

/// Stokes operator A = -Pi Laplacian, diagonal with eigenvalue |kappa|^2.
VelocityField apply_stokes(const VelocityField& u);

/// Zeroes every coefficient outside the dealias mask.
VelocityField dealias(const VelocityField& u);

/// B(u, v) = -Pi[(u . grad) v], pseudospectral with 2/3-rule dealiasing of the
/// product before projection. Throws ConfigError on grid mismatch.
VelocityField bilinear(const VelocityField& u, const VelocityField& v);

/// <u, v>_H (includes the domain measure).
double inner_h(const VelocityField& u, const VelocityField& v);
NormTriple norms(const VelocityField& u);

/// L^4 norm of the physical field, by quadrature on a 2n zero-padded grid
/// (exact for dealiased fields).
double l4_norm(const VelocityField& u);

/// Physical samples on the native n x n grid, or on a zero-padded m x m grid (m >= n, even).
PhysicalField to_physical(const VelocityField& u, int m = 0);

/// L^2 norm of the physical samples on the native grid.
double physical_h_norm(const VelocityField& u);

/// Random dealiased divergence-free field with |u_hat(k)| ~ amplitude |k|^-decay.
/// Deterministic in seed. decay must exceed 1.
VelocityField random_field(std::uint64_t seed, const SpectralGrid& grid, double spectrum_decay,
                           double amplitude);

}  // namespace jumpns
