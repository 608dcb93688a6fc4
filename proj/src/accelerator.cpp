#include "gpeaccel/accelerator.hpp"

#include <cmath>

namespace gpeaccel {

void validate(const AccelConfig& cfg) {
  if (!(0.0 < cfg.eps2 && cfg.eps2 < cfg.eps1_min && cfg.eps1_min < cfg.eps1_max))
    throw Error("acceleration window requires 0 < eps2 < eps1_min < eps1_max");
  if (cfg.n_e < 1) throw Error("n_e must be >= 1");
  if (!(cfg.e0 > 0.0)) throw Error("e0 must be positive");
}

Field UNetPredictor::predict(const State& phi, const TangentField& g) const {
  const Tensor out = forward(*model_, prepare_input(phi, g));
  return postprocess(out, phi.grid());
}

Field IdentityPredictor::predict(const State& phi, const TangentField&) const {
  Field f = phi.field();
  f *= scale_;
  return f;
}

double norm_error_indicator(const Field& candidate) { return std::abs(1.0 - norm_l2(candidate)); }

const char* to_string(InvokeDecision d) {
  switch (d) {
    case InvokeDecision::skip: return "skip";
    case InvokeDecision::try_apply: return "try";
    case InvokeDecision::force: return "force";
  }
  return "?";
}

InvokeDecision should_invoke(int k_in_window, double gnorm, bool already_applied, const AccelConfig& cfg) {
  if (already_applied) return InvokeDecision::skip;
  if (gnorm < cfg.eps1_min) return InvokeDecision::force;
  if (gnorm <= cfg.eps1_max && k_in_window % cfg.n_e == 0) return InvokeDecision::try_apply;
  return InvokeDecision::skip;
}

namespace {

// One predictor application on the solver's current iterate. Returns true
// when the run should consider the single application used up.
struct Applier {
  EarcgSolver& solver;
  const Predictor* predictor;
  std::vector<AccelEvent>& events;
  std::vector<std::string>& warnings;
  bool disabled = false;

  // `unconditional`: substitute regardless of the indicator.
  bool apply(bool unconditional, double e0, AccelDecision success_tag) {
    AccelEvent ev;
    ev.k = solver.k();
    ev.gnorm = solver.gnorm();
    ev.pre_energy = solver.energy();
    ev.post_energy = ev.pre_energy;
    Field candidate(solver.state().grid());
    try {
      candidate = predictor->predict(solver.state(), solver.gradient());
    } catch (const std::exception& e) {
      warnings.push_back(std::string("predictor failed, continuing without acceleration: ") + e.what());
      disabled = true;
      return true;
    }
    ev.indicator = norm_error_indicator(candidate);
    if (!unconditional && !(ev.indicator < e0)) {
      ev.decision = AccelDecision::rejected;
      solver.tag_current(EventTag::nn_rejected);
      events.push_back(std::move(ev));
      return false;
    }
    ev.decision = success_tag;
    const EventTag tag = success_tag == AccelDecision::accepted ? EventTag::nn_applied : EventTag::nn_forced;
    try {
      const double nrm = norm_l2(candidate);
      if (!(nrm >= 1e-14) || !std::isfinite(nrm))
        throw DegenerateDirectionError("predicted state has norm " + std::to_string(nrm));
      candidate *= 1.0 / nrm;
      ev.input = solver.state().field();
      State next = State::from_unit(candidate);
      solver.reset_to(next);
      ev.output = std::move(candidate);
      ev.post_energy = solver.energy();
    } catch (const Error& e) {
      ev.fallback = true;
      ev.input.reset();
      warnings.push_back(std::string("predicted state unusable, continuing plain EARCG: ") + e.what());
    }
    solver.tag_current(tag);
    events.push_back(std::move(ev));
    return true;
  }
};

RunTrace finish(EarcgSolver& s, Termination why, std::vector<AccelEvent> events, std::vector<std::string> warnings) {
  RunTrace t = s.finish(why);
  t.events = std::move(events);
  t.warnings.insert(t.warnings.end(), warnings.begin(), warnings.end());
  return t;
}

}  // namespace

RunTrace accelerated_solve(const State& phi0, const GpeParams& p, const AccelConfig& cfg,
                           const EarcgConfig& earcg_cfg, const Predictor* predictor) {
  validate(cfg);
  EarcgConfig ec = earcg_cfg;
  ec.tol = cfg.eps2;
  EarcgSolver s(phi0, p, ec);
  std::vector<AccelEvent> events;
  std::vector<std::string> warnings;
  Applier applier{s, predictor, events, warnings};
  if (!predictor) applier.disabled = true;
  bool applied = false;
  int window_start = -1;

  while (true) {
    s.notify();
    if (s.converged(cfg.eps2)) return finish(s, Termination::converged, std::move(events), std::move(warnings));
    if (!applied && !applier.disabled) {
      if (window_start < 0 && s.gnorm() <= cfg.eps1_max) window_start = s.k();
      if (window_start >= 0) {
        const InvokeDecision d = should_invoke(s.k() - window_start, s.gnorm(), applied, cfg);
        if (d == InvokeDecision::force) {
          applied = applier.apply(true, cfg.e0, AccelDecision::forced);
        } else if (d == InvokeDecision::try_apply) {
          applied = applier.apply(false, cfg.e0, AccelDecision::accepted);
        }
        if (applied && s.converged(cfg.eps2)) {
          s.notify();
          return finish(s, Termination::converged, std::move(events), std::move(warnings));
        }
      }
    }
    if (s.k() >= ec.max_iters) return finish(s, Termination::max_iters, std::move(events), std::move(warnings));
    if (!s.step()) return finish(s, Termination::stagnation, std::move(events), std::move(warnings));
  }
}

RunTrace random_apply_solve(const State& phi0, const GpeParams& p, double eps1, double eps2,
                            const EarcgConfig& earcg_cfg, const Predictor* predictor) {
  if (!(eps2 > 0.0 && eps1 > eps2)) throw Error("random application needs eps1 > eps2 > 0");
  EarcgConfig ec = earcg_cfg;
  ec.tol = eps2;
  EarcgSolver s(phi0, p, ec);
  std::vector<AccelEvent> events;
  std::vector<std::string> warnings;
  Applier applier{s, predictor, events, warnings};
  if (!predictor) applier.disabled = true;
  bool applied = false;

  while (true) {
    s.notify();
    if (s.converged(eps2)) return finish(s, Termination::converged, std::move(events), std::move(warnings));
    if (!applied && !applier.disabled && s.gnorm() < eps1) {
      applied = applier.apply(true, 0.0, AccelDecision::forced);
      if (s.converged(eps2)) {
        s.notify();
        return finish(s, Termination::converged, std::move(events), std::move(warnings));
      }
    }
    if (s.k() >= ec.max_iters) return finish(s, Termination::max_iters, std::move(events), std::move(warnings));
    if (!s.step()) return finish(s, Termination::stagnation, std::move(events), std::move(warnings));
  }
}

}  // namespace gpeaccel
