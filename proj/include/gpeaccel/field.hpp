// Periodic box discretization: grid, unitary transforms, L2 geometry and
// random states.
//
// Scaling convention (used everywhere):
//   coefficients c and real-space samples psi are related by
//     c   = (a / n^2) * FFT(psi)
//     psi = (1 / a)   * IFFT_unnormalized(c)
//   so that  sum_k |c_k|^2 == cell_area * sum_j |psi_j|^2 == ||psi||_{L2}^2.
//   A unit coefficient at mode 0 is the constant field 1/a.
#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpeaccel {

using cplx = std::complex<double>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GridError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Uniform n x n grid on the square [-a/2, a/2)^2 with periodic Fourier basis.
/// Sample (i, j) sits at (xs[i], xs[j]); i runs along x1, storage is row-major.
class Grid {
 public:
  /// Validated construction: a > 0, n >= 16 and n % 16 == 0.
  static Grid make(double a, int n);
  /// Skips the U-Net divisibility rule (n >= 2, even). Test use only.
  static Grid make_unchecked(double a, int n);

  double a() const { return impl_->a; }
  int n() const { return impl_->n; }
  std::size_t size() const { return impl_->xs.size() * impl_->xs.size(); }
  double spacing() const { return impl_->a / impl_->n; }
  double cell_area() const { return spacing() * spacing(); }
  std::span<const double> xs() const { return impl_->xs; }
  std::span<const double> ks() const { return impl_->ks; }
  /// |k|^2 per spectral index, row-major.
  std::span<const double> k_squared() const { return impl_->k2; }

  bool same_as(const Grid& other) const;

  /// In-place unitary transforms (see header comment).
  void to_real_inplace(std::span<cplx> data) const;
  void to_spectral_inplace(std::span<cplx> data) const;

 private:
  struct Impl;
  explicit Grid(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  struct Impl {
    double a;
    int n;
    std::vector<double> xs;
    std::vector<double> ks;
    std::vector<double> k2;
    void* forward;   // fftw_plan
    void* backward;  // fftw_plan
  };
  std::shared_ptr<const Impl> impl_;
};

inline Grid make_grid(double a, int n) { return Grid::make(a, n); }

/// Complex field stored as spectral coefficients.
class Field {
 public:
  explicit Field(Grid grid);
  Field(Grid grid, std::vector<cplx> coeffs);

  const Grid& grid() const { return grid_; }
  std::span<const cplx> coeffs() const { return coeffs_; }
  std::span<cplx> coeffs() { return coeffs_; }

  Field& operator+=(const Field& o);
  Field& operator-=(const Field& o);
  Field& operator*=(double s);
  Field& operator*=(cplx s);
  /// this += s * o
  Field& axpy(double s, const Field& o);

  friend Field operator+(Field l, const Field& r) { return l += r; }
  friend Field operator-(Field l, const Field& r) { return l -= r; }
  friend Field operator*(double s, Field f) { return f *= s; }
  friend Field operator*(cplx s, Field f) { return f *= s; }

 private:
  Grid grid_;
  std::vector<cplx> coeffs_;
};

void require_same_grid(const Field& v, const Field& w);

/// Re \int conj(v) w dx.
double inner_l2(const Field& v, const Field& w);
double norm_l2(const Field& v);

/// Real-space samples, n*n row-major.
std::vector<cplx> to_real(const Field& f);
Field to_spectral(const Grid& grid, std::vector<cplx> samples);

/// Spectral multiplier i*k along axis 0 (x1) or 1 (x2).
Field derivative(const Field& f, int axis);

/// Point on the L2 unit sphere.
class State {
 public:
  /// Normalizes; throws if the field norm is below 1e-14.
  static State normalized(Field f);
  /// Wraps a field assumed to be unit norm already (checked to 1e-10).
  static State from_unit(Field f);

  const Field& field() const { return field_; }
  const Grid& grid() const { return field_.grid(); }
  std::span<const cplx> coeffs() const { return field_.coeffs(); }

 private:
  explicit State(Field f) : field_(std::move(f)) {}
  Field field_;
};

using StatePtr = std::shared_ptr<const State>;

/// Field tangent to the sphere at `base`: Re<base, field> = 0.
class TangentField {
 public:
  /// Projects `f` onto the tangent space of `base`.
  static TangentField project(StatePtr base, Field f);
  /// Takes `f` as-is; caller guarantees tangency.
  static TangentField assume(StatePtr base, Field f);

  const Field& field() const { return field_; }
  Field& field() { return field_; }
  const State& base() const { return *base_; }
  const StatePtr& base_ptr() const { return base_; }
  const Grid& grid() const { return field_.grid(); }
  std::span<const cplx> coeffs() const { return field_.coeffs(); }

  /// Removes the normal component w.r.t. the base (drift suppression).
  void reproject();

 private:
  TangentField(StatePtr base, Field f) : base_(std::move(base)), field_(std::move(f)) {}
  StatePtr base_;
  Field field_;
};

/// Every real and imaginary coefficient i.i.d. N(0, 1), then L2-normalized.
State random_state(const Grid& grid, std::uint64_t seed);

}  // namespace gpeaccel
