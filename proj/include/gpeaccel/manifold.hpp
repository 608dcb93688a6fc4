// Geometry of the L2 unit sphere under the energy-adaptive metric.
#pragma once

#include <optional>

#include "gpeaccel/gpe_operator.hpp"

namespace gpeaccel {

class DegenerateDirectionError : public Error {
 public:
  using Error::Error;
};

/// Everything the metric needs at one iterate phi: the frozen Hamiltonian,
/// y = A_phi^{-1} phi and d = <y, phi>. The inverse solve happens once here.
class MetricContext {
 public:
  MetricContext(StatePtr phi, const GpeParams& p, double inner_rtol,
                const std::optional<Field>& warm_start = std::nullopt);

  const State& state() const { return *state_; }
  const StatePtr& state_ptr() const { return state_; }
  const HamiltonianContext& ham() const { return ham_; }
  const Field& inverse_phi() const { return y_; }
  double d() const { return d_; }
  int inner_iterations() const { return inner_iterations_; }

 private:
  StatePtr state_;
  HamiltonianContext ham_;
  Field y_;
  double d_;
  int inner_iterations_;
};

/// g = phi - y / d.
TangentField ea_gradient(const MetricContext& mc);

/// (phi + v) / ||phi + v||.
State retract(const State& phi, const Field& v);

/// Differentiated normalization at u = phi + v applied to w:
/// w / ||u|| - u Re<u, w> / ||u||^3. Tangent at retract(phi, v).
Field transport_formula(const State& phi, const Field& v, const Field& w);

/// transport_formula re-projected onto the tangent space of `new_base`, which
/// must be retract(phi, v).
TangentField transport(const State& phi, const Field& v, const Field& w, StatePtr new_base);

/// sqrt(a_phi(v, v)).
double energy_norm(const MetricContext& mc, const Field& v);

}  // namespace gpeaccel
