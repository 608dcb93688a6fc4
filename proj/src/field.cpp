#include "gpeaccel/field.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <random>

namespace gpeaccel {

namespace {

struct PlanPair {
  fftw_plan forward;
  fftw_plan backward;
};

// FFTW planning is not thread-safe; execution with the new-array API is.
// Plans are cached per n for the lifetime of the process.
PlanPair plans_for(int n) {
  static std::mutex mutex;
  static std::map<int, PlanPair> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<cplx> scratch(static_cast<std::size_t>(n) * n);
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  PlanPair p{fftw_plan_dft_2d(n, n, buf, buf, FFTW_FORWARD, flags),
             fftw_plan_dft_2d(n, n, buf, buf, FFTW_BACKWARD, flags)};
  cache.emplace(n, p);
  return p;
}

}  // namespace

Grid Grid::make(double a, int n) {
  if (!(a > 0.0) || !std::isfinite(a)) throw GridError("box width must be positive, got " + std::to_string(a));
  if (n < 16 || n % 16 != 0)
    throw GridError("grid size must be >= 16 and divisible by 16, got " + std::to_string(n));
  return make_unchecked(a, n);
}

Grid Grid::make_unchecked(double a, int n) {
  if (!(a > 0.0)) throw GridError("box width must be positive");
  if (n < 2 || n % 2 != 0) throw GridError("grid size must be even and >= 2");
  auto impl = std::make_shared<Impl>();
  impl->a = a;
  impl->n = n;
  impl->xs.resize(n);
  impl->ks.resize(n);
  const double h = a / n;
  const double dk = 2.0 * std::numbers::pi / a;
  for (int i = 0; i < n; ++i) {
    impl->xs[i] = -0.5 * a + i * h;
    const int m = i < n / 2 ? i : i - n;
    impl->ks[i] = dk * m;
  }
  impl->k2.resize(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      impl->k2[static_cast<std::size_t>(i) * n + j] = impl->ks[i] * impl->ks[i] + impl->ks[j] * impl->ks[j];
  const PlanPair p = plans_for(n);
  impl->forward = p.forward;
  impl->backward = p.backward;
  return Grid(std::move(impl));
}

bool Grid::same_as(const Grid& other) const {
  return impl_ == other.impl_ || (impl_->n == other.impl_->n && impl_->a == other.impl_->a);
}

void Grid::to_real_inplace(std::span<cplx> data) const {
  if (data.size() != size()) throw ShapeError("transform size mismatch");
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(static_cast<fftw_plan>(impl_->backward), buf, buf);
  const double s = 1.0 / impl_->a;
  for (auto& v : data) v *= s;
}

void Grid::to_spectral_inplace(std::span<cplx> data) const {
  if (data.size() != size()) throw ShapeError("transform size mismatch");
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(static_cast<fftw_plan>(impl_->forward), buf, buf);
  const double s = impl_->a / (static_cast<double>(impl_->n) * impl_->n);
  for (auto& v : data) v *= s;
}

Field::Field(Grid grid) : grid_(std::move(grid)), coeffs_(grid_.size()) {}

Field::Field(Grid grid, std::vector<cplx> coeffs) : grid_(std::move(grid)), coeffs_(std::move(coeffs)) {
  if (coeffs_.size() != grid_.size()) throw ShapeError("coefficient array does not match grid");
}

Field& Field::operator+=(const Field& o) {
  require_same_grid(*this, o);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
  return *this;
}

Field& Field::operator-=(const Field& o) {
  require_same_grid(*this, o);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= o.coeffs_[i];
  return *this;
}

Field& Field::operator*=(double s) {
  for (auto& c : coeffs_) c *= s;
  return *this;
}

Field& Field::operator*=(cplx s) {
  for (auto& c : coeffs_) c *= s;
  return *this;
}

Field& Field::axpy(double s, const Field& o) {
  require_same_grid(*this, o);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += s * o.coeffs_[i];
  return *this;
}

void require_same_grid(const Field& v, const Field& w) {
  if (!v.grid().same_as(w.grid())) throw GridError("fields live on different grids");
}

double inner_l2(const Field& v, const Field& w) {
  require_same_grid(v, w);
  const auto cv = v.coeffs();
  const auto cw = w.coeffs();
  double s = 0.0;
  for (std::size_t i = 0; i < cv.size(); ++i) s += cv[i].real() * cw[i].real() + cv[i].imag() * cw[i].imag();
  return s;
}

double norm_l2(const Field& v) { return std::sqrt(inner_l2(v, v)); }

std::vector<cplx> to_real(const Field& f) {
  std::vector<cplx> out(f.coeffs().begin(), f.coeffs().end());
  f.grid().to_real_inplace(out);
  return out;
}

Field to_spectral(const Grid& grid, std::vector<cplx> samples) {
  if (samples.size() != grid.size()) throw ShapeError("sample array does not match grid");
  grid.to_spectral_inplace(samples);
  return Field(grid, std::move(samples));
}

Field derivative(const Field& f, int axis) {
  const int n = f.grid().n();
  const auto ks = f.grid().ks();
  Field out(f.grid());
  auto src = f.coeffs();
  auto dst = out.coeffs();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * n + j;
      const double k = axis == 0 ? ks[i] : ks[j];
      dst[idx] = cplx(0.0, k) * src[idx];
    }
  return out;
}

State State::normalized(Field f) {
  const double nrm = norm_l2(f);
  if (!(nrm >= 1e-14)) throw Error("cannot normalize a field with norm " + std::to_string(nrm));
  f *= 1.0 / nrm;
  return State(std::move(f));
}

State State::from_unit(Field f) {
  const double nrm = norm_l2(f);
  if (std::abs(nrm - 1.0) > 1e-10) throw Error("field is not unit norm: " + std::to_string(nrm));
  return State(std::move(f));
}

TangentField TangentField::project(StatePtr base, Field f) {
  TangentField t(std::move(base), std::move(f));
  t.reproject();
  return t;
}

TangentField TangentField::assume(StatePtr base, Field f) {
  require_same_grid(base->field(), f);
  return TangentField(std::move(base), std::move(f));
}

void TangentField::reproject() {
  const double c = inner_l2(base_->field(), field_);
  field_.axpy(-c, base_->field());
}

State random_state(const Grid& grid, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<cplx> c(grid.size());
  for (auto& v : c) {
    const double re = normal(rng);
    const double im = normal(rng);
    v = cplx(re, im);
  }
  return State::normalized(Field(grid, std::move(c)));
}

}  // namespace gpeaccel
