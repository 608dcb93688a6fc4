#include "gpeaccel/earcg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gpeaccel {

const char* to_string(EventTag t) {
  switch (t) {
    case EventTag::plain: return "plain";
    case EventTag::nn_applied: return "nn_applied";
    case EventTag::nn_rejected: return "nn_rejected";
    case EventTag::nn_forced: return "nn_forced";
  }
  return "?";
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::max_iters: return "max_iters";
    case Termination::stagnation: return "stagnation";
  }
  return "?";
}

const char* to_string(AccelDecision d) {
  switch (d) {
    case AccelDecision::accepted: return "accepted";
    case AccelDecision::rejected: return "rejected";
    case AccelDecision::forced: return "forced";
  }
  return "?";
}

namespace {

struct Trial {
  StatePtr state;
  double f = std::numeric_limits<double>::infinity();
};

Trial evaluate_step(const MetricContext& mc, const TangentField& eta, double tau) {
  Trial t;
  try {
    Field step = eta.field();
    step *= tau;
    t.state = std::make_shared<const State>(retract(mc.state(), step));
    t.f = energy(*t.state, mc.ham().params());
  } catch (const DegenerateDirectionError&) {
    t.state.reset();
  }
  return t;
}

}  // namespace

LineSearchResult line_search(const MetricContext& mc, const TangentField& eta, double tau_init, double f0,
                             double f_ref, double slope, const LineSearchConfig& cfg) {
  if (!(tau_init > 0.0)) throw Error("initial step size must be positive");
  LineSearchResult res;
  if (!(slope < 0.0)) {
    res.status = LineSearchStatus::non_descent;
    return res;
  }
  const double slack = cfg.rounding_slack * std::max(1.0, std::abs(f_ref));
  auto admissible = [&](double tau, double f) {
    return std::isfinite(f) && f <= f_ref + cfg.c1 * tau * slope + slack;
  };
  // Curvature of the quadratic through (0, f0) with slope `slope` and (tau, f).
  auto curvature = [&](double tau, double f) { return (f - f0 - slope * tau) / (tau * tau); };

  double tau = tau_init;
  for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
    Trial t = evaluate_step(mc, eta, tau);
    if (admissible(tau, t.f)) {
      // One extrapolation trial towards the model minimizer when the seed was
      // accepted outright; keeps the step size free to grow.
      if (bt == 0 && cfg.max_expansion > 1.0) {
        const double c = curvature(tau, t.f);
        const double target =
            std::min(c > 0.0 ? -slope / (2.0 * c) : cfg.max_expansion * tau, cfg.max_expansion * tau);
        if (target > 1.1 * tau) {
          Trial ext = evaluate_step(mc, eta, target);
          if (ext.f < t.f && admissible(target, ext.f)) {
            tau = target;
            t = std::move(ext);
            res.extrapolated = true;
          }
        }
      }
      res.tau = tau;
      res.backtracks = bt;
      res.energy = t.f;
      res.state = std::move(t.state);
      return res;
    }
    double factor = cfg.shrink_max;
    if (std::isfinite(t.f)) {
      const double c = curvature(tau, t.f);
      if (c > 0.0) factor = std::clamp(-slope / (2.0 * c) / tau, cfg.shrink_min, cfg.shrink_max);
    }
    tau *= factor;
  }
  res.status = LineSearchStatus::stagnation;
  res.backtracks = cfg.max_backtracks;
  return res;
}

LineSearchResult line_search(const MetricContext& mc, const TangentField& eta, double tau_init,
                             const LineSearchConfig& cfg) {
  const double f0 = energy(mc.state(), mc.ham().params());
  const double slope = bilinear_a(mc.ham(), mc.state().field(), eta.field());
  return line_search(mc, eta, tau_init, f0, f0, slope, cfg);
}

EarcgSolver::EarcgSolver(const State& phi0, const GpeParams& p, EarcgConfig cfg)
    : params_(p), cfg_(std::move(cfg)), start_(std::chrono::steady_clock::now()) {
  validate(p);
  if (!(cfg_.tol > 0.0)) throw Error("tolerance must be positive");
  if (cfg_.max_iters < 1) throw Error("max_iters must be >= 1");
  if (std::abs(norm_l2(phi0.field()) - 1.0) > 1e-10) throw Error("initial state is not unit norm");
  gnorm_ = std::numeric_limits<double>::infinity();
  evaluate_at(std::make_shared<const State>(phi0), std::nullopt);
  settle_inner_tolerance();
  history_.push_back(energy_);
}

double EarcgSolver::seconds() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

double EarcgSolver::inner_rtol() const {
  double r = cfg_.inner_rtol_cap;
  if (std::isfinite(gnorm_)) r = std::min(r, cfg_.inner_rtol_factor * gnorm_);
  return std::max(r, cfg_.inner_rtol_floor);
}

void EarcgSolver::evaluate_at(StatePtr phi, const std::optional<Field>& warm, std::optional<double> known_energy) {
  rtol_used_ = inner_rtol();
  auto mc = std::make_unique<MetricContext>(phi, params_, rtol_used_, warm);
  g_ = ea_gradient(*mc);
  ag_ = apply_hamiltonian(mc->ham(), g_->field());
  gnorm_ = std::sqrt(std::max(0.0, inner_l2(g_->field(), *ag_)));
  energy_ = known_energy ? *known_energy : gpeaccel::energy(*phi, params_);
  mc_ = std::move(mc);
  IterationRecord rec;
  rec.k = k_;
  rec.energy = energy_;
  rec.gnorm = gnorm_;
  rec.beta = beta_;
  rec.wall = seconds();
  trace_.records.push_back(rec);
}

double EarcgSolver::lambda() const {
  return inner_l2(state().field(), apply_hamiltonian(mc_->ham(), state().field()));
}

void EarcgSolver::notify() const {
  if (cfg_.callback) cfg_.callback(IterationView{k_, state(), *g_, gnorm_, tau_, energy_});
}

void EarcgSolver::tag_current(EventTag tag) { trace_.records.back().event = tag; }

void EarcgSolver::reset_to(const State& phi) {
  beta_ = 0.0;
  evaluate_at(std::make_shared<const State>(phi), mc_->inverse_phi());
  // The new record replaces the role of the current one for iterate k.
  trace_.records.erase(trace_.records.end() - 2);
  settle_inner_tolerance();
  eta_.reset();
  tau_ = 1.0;
  history_.clear();
  history_.push_back(energy_);
}

void EarcgSolver::settle_inner_tolerance() {
  // With no previous gradient (start, or a replaced iterate) the tolerance is
  // tightened until it matches the gradient at this point.
  for (int i = 0; i < 12 && rtol_used_ > inner_rtol(); ++i) refine_gradient(inner_rtol());
}

void EarcgSolver::refine_gradient(double rtol) {
  rtol_used_ = std::max(cfg_.inner_rtol_floor, rtol);
  auto mc = std::make_unique<MetricContext>(mc_->state_ptr(), params_, rtol_used_, mc_->inverse_phi());
  g_ = ea_gradient(*mc);
  ag_ = apply_hamiltonian(mc->ham(), g_->field());
  gnorm_ = std::sqrt(std::max(0.0, inner_l2(g_->field(), *ag_)));
  mc_ = std::move(mc);
  trace_.records.back().gnorm = gnorm_;
  ++trace_.records.back().refinements;
}

bool EarcgSolver::step() {
  auto steepest = [&] {
    Field neg = g_->field();
    neg *= -1.0;
    eta_ = TangentField::assume(mc_->state_ptr(), std::move(neg));
  };
  if (!eta_) steepest();

  bool restarted = false;
  int refinements = 0;
  LineSearchResult ls;
  const double f_ref = *std::max_element(history_.begin(), history_.end());
  // Directional derivative against r = A phi - lambda phi; equal to <phi, A eta>
  // for tangent eta but free of the O(lambda) cancellation near convergence.
  Field r = apply_hamiltonian(mc_->ham(), mc_->state().field());
  r.axpy(-inner_l2(mc_->state().field(), r), mc_->state().field());
  while (true) {
    double slope;
    if (restarted) {
      slope = inner_l2(r, eta_->field());
    } else {
      const Field a_eta = apply_hamiltonian(mc_->ham(), eta_->field());
      slope = inner_l2(r, eta_->field());
      const double eta_norm = std::sqrt(std::max(0.0, inner_l2(eta_->field(), a_eta)));
      if (slope >= -cfg_.reset_threshold * eta_norm * gnorm_) {
        steepest();
        restarted = true;
        slope = inner_l2(r, eta_->field());
      }
    }
    ls = line_search(*mc_, *eta_, tau_, energy_, f_ref, slope, cfg_.line_search);
    if (ls.status == LineSearchStatus::ok) break;
    if (!restarted) {
      steepest();
      restarted = true;
      continue;
    }
    // -g itself failed: the inner solve is too loose for this gradient size.
    if (refinements < cfg_.max_refinements && rtol_used_ > cfg_.inner_rtol_floor) {
      refine_gradient(rtol_used_ * cfg_.refine_factor);
      ++refinements;
      steepest();
      if (converged(cfg_.tol)) return true;
      continue;
    }
    auto& rec = trace_.records.back();
    rec.restarted = restarted;
    rec.backtracks = ls.backtracks;
    trace_.warnings.push_back("line search stagnated at iteration " + std::to_string(k_));
    return false;
  }
  const MetricContext& mc = *mc_;
  auto& rec = trace_.records.back();
  rec.restarted = restarted;
  rec.backtracks = ls.backtracks;
  rec.tau = ls.tau;
  tau_ = ls.tau;

  Field v = eta_->field();
  v *= tau_;
  const Field tg = transport_formula(mc.state(), v, g_->field());
  const Field teta = transport_formula(mc.state(), v, eta_->field());
  const double g2_old = gnorm_ * gnorm_;

  const Field warm = mc.inverse_phi();
  ++k_;
  beta_ = 0.0;
  evaluate_at(ls.state, warm, ls.energy);

  const StatePtr& base = mc_->state_ptr();
  const TangentField tg_t = TangentField::project(base, tg);
  TangentField teta_t = TangentField::project(base, teta);
  const double fr = gnorm_ * gnorm_ / g2_old;
  const double pr = inner_l2(*ag_, g_->field() - tg_t.field()) / g2_old;
  beta_ = std::max(0.0, std::min(fr, pr));
  trace_.records.back().beta = beta_;
  trace_.records.back().fr = fr;

  Field next = g_->field();
  next *= -1.0;
  next.axpy(beta_, teta_t.field());
  eta_ = TangentField::project(base, std::move(next));

  history_.push_back(energy_);
  while (static_cast<int>(history_.size()) > cfg_.line_search.window) history_.pop_front();
  return true;
}

RunTrace EarcgSolver::finish(Termination why) {
  trace_.final_state = mc_->state_ptr();
  trace_.final_energy = energy_;
  trace_.final_gnorm = gnorm_;
  trace_.lambda = lambda();
  trace_.iterations = k_;
  trace_.wall = seconds();
  trace_.termination = why;
  return std::move(trace_);
}

RunTrace earcg_solve(const State& phi0, const GpeParams& p, const EarcgConfig& cfg) {
  EarcgSolver solver(phi0, p, cfg);
  while (true) {
    solver.notify();
    if (solver.converged(cfg.tol)) return solver.finish(Termination::converged);
    if (solver.k() >= cfg.max_iters) return solver.finish(Termination::max_iters);
    if (!solver.step()) return solver.finish(Termination::stagnation);
  }
}

}  // namespace gpeaccel
