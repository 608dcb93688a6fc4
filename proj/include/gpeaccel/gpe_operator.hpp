// Rotating Gross-Pitaevskii energy, Hamiltonian and its inverse.
#pragma once

#include <optional>
#include <vector>

#include "gpeaccel/field.hpp"

namespace gpeaccel {

class NotCoerciveError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  SolverError(const std::string& what, double last_residual) : Error(what), last_residual_(last_residual) {}
  double last_residual() const { return last_residual_; }

 private:
  double last_residual_;
};

/// Physical parameters: box width a, grid size n, trap V = v1 x1^2 + v2 x2^2,
/// rotation speed omega, interaction strength kappa.
struct GpeParams {
  double a = 20.0;
  int n = 64;
  double v1 = 1.0;
  double v2 = 1.0;
  double omega = 0.0;
  double kappa = 0.0;
};

/// Throws GridError/Error on invalid values; NotCoerciveError unless
/// omega^2 < 4 min(v1, v2).
void validate(const GpeParams& p);

/// Operator -Delta + V + omega Lz + kappa * density, frozen at one density.
class HamiltonianContext {
 public:
  /// Density |phi|^2 of the given state.
  HamiltonianContext(const State& phi, const GpeParams& p);
  /// Explicit nonnegative real-space density (n*n samples).
  HamiltonianContext(const Grid& grid, const GpeParams& p, std::vector<double> density);

  const GpeParams& params() const { return params_; }
  const Grid& grid() const { return grid_; }
  std::span<const double> density() const { return density_; }
  std::span<const double> potential() const { return potential_; }

 private:
  void init_potential();
  GpeParams params_;
  Grid grid_;
  std::vector<double> density_;
  std::vector<double> potential_;
};

/// (-Delta + V + omega Lz + kappa rho) v.
Field apply_hamiltonian(const HamiltonianContext& ctx, const Field& v);

/// Lz v = -i (x1 d2 v - x2 d1 v), derivatives spectral, coordinates pointwise.
Field apply_lz(const Field& v);

/// a_phi(v, w) = Re <v, A w>.
double bilinear_a(const HamiltonianContext& ctx, const Field& v, const Field& w);

/// E(phi) = \int 1/2|grad phi|^2 + 1/2 V|phi|^2 + 1/2 omega conj(phi) Lz phi + 1/4 kappa |phi|^4.
double energy(const State& phi, const GpeParams& p);
double energy(const Field& phi, const GpeParams& p);

/// \int |phi|^4 dx.
double quartic_integral(const Field& phi);

struct InverseSolveResult {
  Field x;
  int iterations = 0;
  double relative_residual = 0.0;
};

struct InverseSolveOptions {
  /// 0 means 10 * n.
  int max_iterations = 0;
  /// Shift in the kinetic preconditioner (|k|^2/2 + shift)^-1.
  double preconditioner_shift = 1.0;
};

/// Preconditioned CG for A x = b with ||A x - b|| <= rtol ||b||.
/// `initial_guess` warm-starts the iteration.
InverseSolveResult solve_inverse(const HamiltonianContext& ctx, const Field& b, double rtol,
                                 const std::optional<Field>& initial_guess = std::nullopt,
                                 const InverseSolveOptions& opts = {});

}  // namespace gpeaccel
