// Energy-adaptive Riemannian conjugate gradient for the GP ground state.
#pragma once

#include <chrono>
#include <deque>
#include <functional>
#include <memory>

#include "gpeaccel/manifold.hpp"
#include "gpeaccel/trace.hpp"

namespace gpeaccel {

/// Nonmonotone Armijo backtracking with safeguarded quadratic interpolation,
/// seeded with the previous accepted step. When the seed is accepted outright
/// one extrapolation trial (at most max_expansion * seed) is made towards the
/// quadratic-model minimizer.
struct LineSearchConfig {
  double c1 = 1e-4;
  double max_expansion = 2.0;  // 1 disables extrapolation
  int window = 5;
  int max_backtracks = 25;
  double shrink_min = 0.1;
  double shrink_max = 0.5;
  /// Relative slack on the reference energy covering rounding in E; below
  /// roughly ||g||_a ~ 1e-7 energy decreases are under double precision.
  double rounding_slack = 1e-14;
};

enum class LineSearchStatus { ok, non_descent, stagnation };

struct LineSearchResult {
  LineSearchStatus status = LineSearchStatus::ok;
  double tau = 0.0;
  int backtracks = 0;
  bool extrapolated = false;
  double energy = 0.0;
  StatePtr state;  // retract(phi, tau * eta) when ok
};

/// Searches f(t) = E(retract(phi, t eta)) for
/// f(t) <= f_ref + c1 t DE(phi)[eta] (+ rounding slack). `slope` is
/// DE(phi)[eta] = a_phi(phi, eta); `f0` is E(phi).
LineSearchResult line_search(const MetricContext& mc, const TangentField& eta, double tau_init, double f0,
                             double f_ref, double slope, const LineSearchConfig& cfg = {});

/// Convenience overload: f_ref = f0 = E(phi), slope computed from eta.
LineSearchResult line_search(const MetricContext& mc, const TangentField& eta, double tau_init,
                             const LineSearchConfig& cfg = {});

struct IterationView {
  int k;
  const State& phi;
  const TangentField& g;
  double gnorm;
  double tau;
  double energy;
};

struct EarcgConfig {
  double tol = 1e-8;
  int max_iters = 30000;
  LineSearchConfig line_search;
  /// Inner solve tolerance is min(inner_rtol_cap, inner_rtol_factor * ||g_prev||_a),
  /// floored at inner_rtol_floor.
  double inner_rtol_cap = 1e-2;
  double inner_rtol_factor = 0.1;
  double inner_rtol_floor = 1e-12;
  double reset_threshold = 1e-14;
  /// When even -g admits no step, the gradient is recomputed with the inner
  /// tolerance multiplied by refine_factor, at most max_refinements times.
  int max_refinements = 4;
  double refine_factor = 1e-2;
  /// Called once per iterate (including k = 0) before the termination test.
  std::function<void(const IterationView&)> callback;
};

/// Step-wise EARCG driver. `earcg_solve` runs it to completion; the
/// accelerator drives it directly so it can swap the iterate.
class EarcgSolver {
 public:
  EarcgSolver(const State& phi0, const GpeParams& p, EarcgConfig cfg);

  int k() const { return k_; }
  double gnorm() const { return gnorm_; }
  double energy() const { return energy_; }
  const State& state() const { return mc_->state(); }
  const StatePtr& state_ptr() const { return mc_->state_ptr(); }
  const TangentField& gradient() const { return *g_; }
  const MetricContext& metric() const { return *mc_; }
  const GpeParams& params() const { return params_; }
  const EarcgConfig& config() const { return cfg_; }
  double tau() const { return tau_; }
  double beta() const { return beta_; }
  bool converged(double tol) const { return gnorm_ < tol; }

  /// One outer iteration. Returns false on stagnation (no admissible step
  /// even along -g with a refined gradient). May return true without moving
  /// when gradient refinement alone drops ||g||_a below tol.
  bool step();

  /// Replaces the iterate and resets CG memory (eta = -g, tau = 1, energy window).
  void reset_to(const State& phi);

  /// Marks the tag of the record for the current iterate.
  void tag_current(EventTag tag);

  /// Lagrange multiplier <phi, A_phi phi> at the current iterate.
  double lambda() const;

  /// Invokes the configured callback for the current iterate.
  void notify() const;

  RunTrace finish(Termination why);

 private:
  void evaluate_at(StatePtr phi, const std::optional<Field>& warm, std::optional<double> known_energy = {});
  double inner_rtol() const;
  void refine_gradient(double rtol);
  void settle_inner_tolerance();
  double seconds() const;

  GpeParams params_;
  EarcgConfig cfg_;
  std::chrono::steady_clock::time_point start_;
  std::unique_ptr<MetricContext> mc_;
  std::optional<TangentField> g_;
  std::optional<Field> ag_;  // A_phi g
  double gnorm_ = 0.0;
  double rtol_used_ = 0.0;
  double energy_ = 0.0;
  std::optional<TangentField> eta_;
  double tau_ = 1.0;
  double beta_ = 0.0;
  int k_ = 0;
  std::deque<double> history_;
  RunTrace trace_;
};

/// Runs EARCG from phi0 until ||g||_a < cfg.tol or cfg.max_iters.
RunTrace earcg_solve(const State& phi0, const GpeParams& p, const EarcgConfig& cfg = {});

}  // namespace gpeaccel
