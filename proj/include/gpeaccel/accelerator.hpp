// Three-phase hybrid solve: EARCG, one learned correction inside the
// acceleration window, EARCG to the final tolerance.
#pragma once

#include <memory>

#include "gpeaccel/earcg.hpp"
#include "gpeaccel/nn_infer.hpp"

namespace gpeaccel {

struct AccelConfig {
  double eps1_min = 1e-4;
  double eps1_max = 1e-1;
  double eps2 = 1e-8;
  int n_e = 5;
  double e0 = 5e-3;
};

void validate(const AccelConfig& cfg);

/// Maps an iterate and its gradient to an unnormalized candidate state.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual Field predict(const State& phi, const TangentField& g) const = 0;
};

/// prepare_input -> U-Net forward -> postprocess.
class UNetPredictor final : public Predictor {
 public:
  explicit UNetPredictor(std::shared_ptr<const UNet> model) : model_(std::move(model)) {}
  Field predict(const State& phi, const TangentField& g) const override;
  const UNet& model() const { return *model_; }

 private:
  std::shared_ptr<const UNet> model_;
};

/// Returns a fixed target state (test double for a perfect network).
class OraclePredictor final : public Predictor {
 public:
  explicit OraclePredictor(Field target) : target_(std::move(target)) {}
  Field predict(const State&, const TangentField&) const override { return target_; }

 private:
  Field target_;
};

/// Returns scale * phi.
class IdentityPredictor final : public Predictor {
 public:
  explicit IdentityPredictor(double scale = 1.0) : scale_(scale) {}
  Field predict(const State& phi, const TangentField&) const override;

 private:
  double scale_;
};

/// |1 - ||candidate||_{L2}|.
double norm_error_indicator(const Field& candidate);

enum class InvokeDecision { skip, try_apply, force };
const char* to_string(InvokeDecision d);

/// `try_apply` iff not applied, gnorm in [eps1_min, eps1_max] and
/// k_in_window % n_e == 0; `force` iff not applied and gnorm < eps1_min.
InvokeDecision should_invoke(int k_in_window, double gnorm, bool already_applied, const AccelConfig& cfg);

/// Runs the hybrid scheme. `earcg_cfg.tol` is ignored in favour of cfg.eps2.
/// A null predictor or a predictor that throws degrades to plain EARCG.
RunTrace accelerated_solve(const State& phi0, const GpeParams& p, const AccelConfig& cfg,
                           const EarcgConfig& earcg_cfg, const Predictor* predictor);

/// Baseline: applies the predictor exactly once (unconditionally) the first
/// time ||g||_a drops below eps1, then continues EARCG to eps2.
RunTrace random_apply_solve(const State& phi0, const GpeParams& p, double eps1, double eps2,
                            const EarcgConfig& earcg_cfg, const Predictor* predictor);

}  // namespace gpeaccel
