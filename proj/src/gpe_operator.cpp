#include "gpeaccel/gpe_operator.hpp"

#include <algorithm>
#include <cmath>

namespace gpeaccel {

void validate(const GpeParams& p) {
  if (!(p.a > 0.0)) throw GridError("box width must be positive");
  if (!(p.v1 > 0.0) || !(p.v2 > 0.0)) throw Error("trap amplitudes v1, v2 must be positive");
  if (!(p.omega >= 0.0)) throw Error("rotation speed must be nonnegative");
  if (!(p.kappa >= 0.0)) throw Error("interaction strength must be nonnegative");
  if (!(p.omega * p.omega < 4.0 * std::min(p.v1, p.v2)))
    throw NotCoerciveError("rotation dominates trap: omega^2 must be < 4 min(v1, v2)");
}

namespace {

void require_params_match(const Grid& g, const GpeParams& p) {
  if (g.n() != p.n || g.a() != p.a) throw GridError("field grid does not match parameters");
}

std::vector<double> density_of(const Field& f) {
  const auto samples = to_real(f);
  std::vector<double> rho(samples.size());
  for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = std::norm(samples[i]);
  return rho;
}

// Real-space samples of Lz applied to the field with coefficients `c`.
std::vector<cplx> lz_samples(const Field& v) {
  const Grid& g = v.grid();
  const int n = g.n();
  const auto xs = g.xs();
  auto d1 = to_real(derivative(v, 0));
  auto d2 = to_real(derivative(v, 1));
  std::vector<cplx> out(g.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * n + j;
      out[idx] = cplx(0.0, -1.0) * (xs[i] * d2[idx] - xs[j] * d1[idx]);
    }
  return out;
}

}  // namespace

HamiltonianContext::HamiltonianContext(const State& phi, const GpeParams& p)
    : params_(p), grid_(phi.grid()), density_(density_of(phi.field())) {
  validate(p);
  require_params_match(grid_, p);
  init_potential();
}

HamiltonianContext::HamiltonianContext(const Grid& grid, const GpeParams& p, std::vector<double> density)
    : params_(p), grid_(grid), density_(std::move(density)) {
  validate(p);
  require_params_match(grid_, p);
  if (density_.size() != grid_.size()) throw ShapeError("density does not match grid");
  for (double d : density_)
    if (!(d >= 0.0)) throw Error("density must be nonnegative");
  init_potential();
}

void HamiltonianContext::init_potential() {
  const int n = grid_.n();
  const auto xs = grid_.xs();
  potential_.resize(grid_.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      potential_[static_cast<std::size_t>(i) * n + j] = params_.v1 * xs[i] * xs[i] + params_.v2 * xs[j] * xs[j];
}

Field apply_lz(const Field& v) { return to_spectral(v.grid(), lz_samples(v)); }

Field apply_hamiltonian(const HamiltonianContext& ctx, const Field& v) {
  if (!v.grid().same_as(ctx.grid())) throw ShapeError("field does not match Hamiltonian grid");
  const auto pot = ctx.potential();
  const auto rho = ctx.density();
  const double kappa = ctx.params().kappa;
  const double omega = ctx.params().omega;

  auto r = to_real(v);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] *= pot[i] + kappa * rho[i];
  if (omega != 0.0) {
    const auto lz = lz_samples(v);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += omega * lz[i];
  }
  Field out = to_spectral(v.grid(), std::move(r));
  const auto k2 = ctx.grid().k_squared();
  auto dst = out.coeffs();
  auto src = v.coeffs();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += k2[i] * src[i];
  return out;
}

double bilinear_a(const HamiltonianContext& ctx, const Field& v, const Field& w) {
  return inner_l2(v, apply_hamiltonian(ctx, w));
}

double quartic_integral(const Field& phi) {
  const auto u = to_real(phi);
  double s = 0.0;
  for (const auto& z : u) {
    const double r = std::norm(z);
    s += r * r;
  }
  return s * phi.grid().cell_area();
}

double energy(const Field& phi, const GpeParams& p) {
  validate(p);
  const Grid& g = phi.grid();
  require_params_match(g, p);
  const int n = g.n();
  const auto xs = g.xs();
  const auto k2 = g.k_squared();
  const auto c = phi.coeffs();

  double kinetic = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) kinetic += k2[i] * std::norm(c[i]);

  const auto u = to_real(phi);
  double trap = 0.0;
  double quartic = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * n + j;
      const double rho = std::norm(u[idx]);
      trap += (p.v1 * xs[i] * xs[i] + p.v2 * xs[j] * xs[j]) * rho;
      quartic += rho * rho;
    }
  double rotation = 0.0;
  if (p.omega != 0.0) {
    const auto lz = lz_samples(phi);
    for (std::size_t i = 0; i < u.size(); ++i) rotation += (std::conj(u[i]) * lz[i]).real();
  }
  const double area = g.cell_area();
  return 0.5 * kinetic + area * (0.5 * trap + 0.5 * p.omega * rotation + 0.25 * p.kappa * quartic);
}

double energy(const State& phi, const GpeParams& p) { return energy(phi.field(), p); }

InverseSolveResult solve_inverse(const HamiltonianContext& ctx, const Field& b, double rtol,
                                 const std::optional<Field>& initial_guess, const InverseSolveOptions& opts) {
  if (!(rtol > 0.0 && rtol < 1.0)) throw Error("rtol must lie in (0, 1)");
  if (!b.grid().same_as(ctx.grid())) throw ShapeError("right-hand side does not match Hamiltonian grid");
  const int max_it = opts.max_iterations > 0 ? opts.max_iterations : 10 * ctx.grid().n();
  const auto k2 = ctx.grid().k_squared();

  auto precondition = [&](const Field& r) {
    Field z = r;
    auto zc = z.coeffs();
    for (std::size_t i = 0; i < zc.size(); ++i) zc[i] /= 0.5 * k2[i] + opts.preconditioner_shift;
    return z;
  };

  const double bnorm = norm_l2(b);
  if (bnorm == 0.0) return {Field(b.grid()), 0, 0.0};
  const double target = rtol * bnorm;

  Field x = initial_guess ? *initial_guess : Field(b.grid());
  Field r = b;
  if (initial_guess) r -= apply_hamiltonian(ctx, x);
  double rnorm = norm_l2(r);
  if (rnorm <= target) return {std::move(x), 0, rnorm / bnorm};

  Field z = precondition(r);
  Field p = z;
  double rz = inner_l2(r, z);
  for (int it = 1; it <= max_it; ++it) {
    const Field ap = apply_hamiltonian(ctx, p);
    const double curvature = inner_l2(p, ap);
    if (!(curvature > 0.0)) throw NotCoerciveError("operator not coercive (nonpositive curvature in CG)");
    const double alpha = rz / curvature;
    x.axpy(alpha, p);
    r.axpy(-alpha, ap);
    rnorm = norm_l2(r);
    if (rnorm <= target) {
      // The recurrence residual drifts from b - A x; confirm and restart if needed.
      r = b - apply_hamiltonian(ctx, x);
      rnorm = norm_l2(r);
      if (rnorm <= target) return {std::move(x), it, rnorm / bnorm};
      z = precondition(r);
      p = z;
      rz = inner_l2(r, z);
      continue;
    }
    z = precondition(r);
    const double rz_new = inner_l2(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    p *= beta;
    p += z;
  }
  throw SolverError("inverse solve did not reach rtol within " + std::to_string(max_it) + " iterations",
                    rnorm / bnorm);
}

}  // namespace gpeaccel
