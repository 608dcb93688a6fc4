#include "gpeaccel/manifold.hpp"

#include <cmath>

namespace gpeaccel {

MetricContext::MetricContext(StatePtr phi, const GpeParams& p, double inner_rtol,
                             const std::optional<Field>& warm_start)
    : state_(std::move(phi)), ham_(*state_, p), y_(state_->grid()) {
  auto sol = solve_inverse(ham_, state_->field(), inner_rtol, warm_start);
  y_ = std::move(sol.x);
  inner_iterations_ = sol.iterations;
  d_ = inner_l2(y_, state_->field());
  if (!(d_ > 0.0)) throw NotCoerciveError("<A^-1 phi, phi> is not positive");
}

TangentField ea_gradient(const MetricContext& mc) {
  Field g = mc.state().field();
  g.axpy(-1.0 / mc.d(), mc.inverse_phi());
  return TangentField::assume(mc.state_ptr(), std::move(g));
}

State retract(const State& phi, const Field& v) {
  Field u = phi.field() + v;
  const double nrm = norm_l2(u);
  if (!(nrm >= 1e-14)) throw DegenerateDirectionError("retraction through the origin");
  u *= 1.0 / nrm;
  return State::from_unit(std::move(u));
}

Field transport_formula(const State& phi, const Field& v, const Field& w) {
  Field u = phi.field() + v;
  const double nrm = norm_l2(u);
  if (!(nrm >= 1e-14)) throw DegenerateDirectionError("transport through the origin");
  const double uw = inner_l2(u, w);
  Field out = w;
  out *= 1.0 / nrm;
  out.axpy(-uw / (nrm * nrm * nrm), u);
  return out;
}

TangentField transport(const State& phi, const Field& v, const Field& w, StatePtr new_base) {
  return TangentField::project(std::move(new_base), transport_formula(phi, v, w));
}

double energy_norm(const MetricContext& mc, const Field& v) {
  const double a = bilinear_a(mc.ham(), v, v);
  if (a < 0.0) throw NotCoerciveError("negative energy-norm square");
  return std::sqrt(a);
}

}  // namespace gpeaccel
