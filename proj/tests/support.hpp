// Helpers shared by the unit and acceptance tests.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "gpeaccel/gpe_operator.hpp"
#include "gpeaccel/manifold.hpp"

namespace testing_support {

using namespace gpeaccel;

/// Dense matrix of the frozen Hamiltonian in spectral coordinates, assembled
/// column by column from unit coefficient vectors.
inline Eigen::MatrixXcd assemble(const HamiltonianContext& ctx) {
  const Grid& g = ctx.grid();
  const auto m = static_cast<Eigen::Index>(g.size());
  Eigen::MatrixXcd a(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    Field e(g);
    e.coeffs()[j] = 1.0;
    const Field col = apply_hamiltonian(ctx, e);
    for (Eigen::Index i = 0; i < m; ++i) a(i, j) = col.coeffs()[i];
  }
  return a;
}

inline Eigen::VectorXcd to_vec(const Field& f) {
  Eigen::VectorXcd v(static_cast<Eigen::Index>(f.coeffs().size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = f.coeffs()[i];
  return v;
}

inline Field from_vec(const Grid& g, const Eigen::VectorXcd& v) {
  Field f(g);
  for (Eigen::Index i = 0; i < v.size(); ++i) f.coeffs()[i] = v(i);
  return f;
}

/// Field with i.i.d. normal coefficients (not normalized).
inline Field random_field(const Grid& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  Field f(g);
  for (auto& c : f.coeffs()) {
    const double re = d(rng);
    c = cplx(re, d(rng));
  }
  return f;
}

/// Smooth random field: random coefficients damped like exp(-|k|^2 / 4).
inline Field smooth_field(const Grid& g, std::uint64_t seed) {
  Field f = random_field(g, seed);
  const auto k2 = g.k_squared();
  for (std::size_t i = 0; i < k2.size(); ++i) f.coeffs()[i] *= std::exp(-k2[i] / 4.0);
  return f;
}

/// Smooth random unit state, localized in the trap.
inline State smooth_state(const Grid& g, std::uint64_t seed) {
  auto samples = to_real(smooth_field(g, seed));
  const auto xs = g.xs();
  const int n = g.n();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) samples[static_cast<std::size_t>(i) * n + j] *= std::exp(-(xs[i] * xs[i] + xs[j] * xs[j]) / 8.0);
  return State::normalized(to_spectral(g, std::move(samples)));
}

/// Real-space function sampled on the grid.
template <typename F>
Field sampled(const Grid& g, F f) {
  const auto xs = g.xs();
  const int n = g.n();
  std::vector<cplx> s(g.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s[static_cast<std::size_t>(i) * n + j] = f(xs[i], xs[j]);
  return to_spectral(g, std::move(s));
}

inline GpeParams params(int n, double omega = 0.0, double kappa = 0.0, double v1 = 1.0, double v2 = 1.0) {
  GpeParams p;
  p.n = n;
  p.omega = omega;
  p.kappa = kappa;
  p.v1 = v1;
  p.v2 = v2;
  return p;
}

/// ||A_phi phi - lambda phi||_{L2} with lambda = <phi, A_phi phi>.
inline double eigen_residual(const State& phi, const GpeParams& p, double* lambda_out = nullptr) {
  const HamiltonianContext ctx(phi, p);
  Field r = apply_hamiltonian(ctx, phi.field());
  const double lambda = inner_l2(phi.field(), r);
  r.axpy(-lambda, phi.field());
  if (lambda_out) *lambda_out = lambda;
  return norm_l2(r);
}

}  // namespace testing_support
