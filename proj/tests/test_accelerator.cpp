#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "gpeaccel/accelerator.hpp"
#include "support.hpp"

using namespace gpeaccel;
using namespace testing_support;

namespace {

class ThrowingPredictor final : public Predictor {
 public:
  Field predict(const State&, const TangentField&) const override { throw std::runtime_error("boom"); }
};

int first_below(const RunTrace& t, double eps) {
  for (const auto& r : t.records)
    if (r.gnorm <= eps) return r.k;
  return -1;
}

}  // namespace

TEST_CASE("should_invoke decision table") {
  const AccelConfig cfg;
  const double inside[] = {1e-1, 5e-2, 1e-3, 1e-4};
  for (double gn : inside) {
    for (int k = 0; k < 12; ++k) {
      const InvokeDecision want = k % 5 == 0 ? InvokeDecision::try_apply : InvokeDecision::skip;
      CHECK(should_invoke(k, gn, false, cfg) == want);
      CHECK(should_invoke(k, gn, true, cfg) == InvokeDecision::skip);
    }
  }
  for (int k = 0; k < 7; ++k) {
    CHECK(should_invoke(k, 0.2, false, cfg) == InvokeDecision::skip);
    CHECK(should_invoke(k, 9.99e-5, false, cfg) == InvokeDecision::force);
    CHECK(should_invoke(k, 9.99e-5, true, cfg) == InvokeDecision::skip);
  }
  AccelConfig one = cfg;
  one.n_e = 1;
  for (int k = 0; k < 4; ++k) CHECK(should_invoke(k, 1e-2, false, one) == InvokeDecision::try_apply);
  CHECK(std::string(to_string(InvokeDecision::force)) == "force");
}

TEST_CASE("configuration validation") {
  AccelConfig c;
  CHECK_NOTHROW(validate(c));
  c.eps2 = 2e-4;
  CHECK_THROWS_AS(validate(c), Error);
  c = {};
  c.eps1_min = 0.2;
  CHECK_THROWS_AS(validate(c), Error);
  c = {};
  c.n_e = 0;
  CHECK_THROWS_AS(validate(c), Error);
  c = {};
  c.e0 = 0.0;
  CHECK_THROWS_AS(validate(c), Error);
}

TEST_CASE("norm error indicator") {
  const Grid g = make_grid(20.0, 16);
  Field f = random_state(g, 1).field();
  CHECK(norm_error_indicator(f) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(norm_error_indicator(1.004 * f) == doctest::Approx(0.004).epsilon(1e-9));
  CHECK(norm_error_indicator(0.99 * f) == doctest::Approx(0.01).epsilon(1e-9));
  CHECK(norm_error_indicator(Field(g)) == 1.0);
}

TEST_CASE("indicator gates the application") {
  const Grid g = make_grid(20.0, 32);
  const GpeParams p = params(32, 0.4, 100.0);
  const State phi0 = random_state(g, 5);
  const AccelConfig cfg;

  const IdentityPredictor near(1.004);
  const RunTrace accepted = accelerated_solve(phi0, p, cfg, {}, &near);
  REQUIRE(accepted.events.size() == 1);
  CHECK(accepted.events[0].decision == AccelDecision::accepted);
  CHECK(accepted.events[0].indicator == doctest::Approx(0.004).epsilon(1e-6));
  CHECK(accepted.events[0].gnorm <= cfg.eps1_max);
  CHECK(accepted.termination == Termination::converged);
  CHECK(accepted.records[accepted.events[0].k].event == EventTag::nn_applied);

  const IdentityPredictor far(0.99);
  const RunTrace rejected = accelerated_solve(phi0, p, cfg, {}, &far);
  REQUIRE(rejected.events.size() >= 2);
  for (std::size_t i = 0; i + 1 < rejected.events.size(); ++i) {
    CHECK(rejected.events[i].decision == AccelDecision::rejected);
    CHECK(rejected.events[i].indicator == doctest::Approx(0.01).epsilon(1e-6));
    if (i > 0) CHECK(rejected.events[i].k - rejected.events[i - 1].k == cfg.n_e);
  }
  const AccelEvent& last = rejected.events.back();
  CHECK(last.decision == AccelDecision::forced);
  CHECK(last.gnorm < cfg.eps1_min);
  CHECK(rejected.termination == Termination::converged);
  CHECK(rejected.final_gnorm < cfg.eps2);
}

TEST_CASE("zero model falls back to plain EARCG") {
  const Grid g = make_grid(20.0, 32);
  const GpeParams p = params(32, 0.4, 100.0);
  const State phi0 = random_state(g, 6);
  EarcgConfig ec;
  ec.tol = 1e-8;
  const RunTrace classical = earcg_solve(phi0, p, ec);

  NetworkSpec spec;
  spec.widths = {4, 8};
  const auto model = std::make_shared<const UNet>(spec, make_zero_archive(spec));
  const UNetPredictor zero(model);
  const RunTrace t = accelerated_solve(phi0, p, {}, {}, &zero);
  CHECK(t.termination == Termination::converged);
  REQUIRE_FALSE(t.events.empty());
  const AccelEvent& forced = t.events.back();
  CHECK(forced.decision == AccelDecision::forced);
  CHECK(forced.fallback);
  CHECK_FALSE(t.warnings.empty());
  for (std::size_t i = 0; i + 1 < t.events.size(); ++i) CHECK(t.events[i].indicator == 1.0);
  CHECK(t.iterations == classical.iterations);
  CHECK(t.final_energy == doctest::Approx(classical.final_energy).epsilon(1e-12));
}

TEST_CASE("throwing or missing predictor degrades to plain EARCG") {
  const Grid g = make_grid(20.0, 32);
  const GpeParams p = params(32, 0.4, 100.0);
  const State phi0 = random_state(g, 7);
  const RunTrace plain = accelerated_solve(phi0, p, {}, {}, nullptr);
  const ThrowingPredictor bad;
  const RunTrace t = accelerated_solve(phi0, p, {}, {}, &bad);
  CHECK(t.termination == Termination::converged);
  CHECK(t.events.empty());
  REQUIRE(t.warnings.size() == 1);
  CHECK(t.warnings[0].find("boom") != std::string::npos);
  CHECK(t.iterations == plain.iterations);
  CHECK(t.final_energy == plain.final_energy);
}

TEST_CASE("oracle predictor finishes within a short Phase 3") {
  const Grid g = make_grid(20.0, 32);
  const GpeParams p = params(32, 0.5, 150.0);
  const State phi0 = random_state(g, 8);
  EarcgConfig ec;
  ec.tol = 1e-10;
  const RunTrace reference = earcg_solve(phi0, p, ec);
  REQUIRE(reference.termination == Termination::converged);
  ec.tol = 1e-8;
  const RunTrace classical = earcg_solve(phi0, p, ec);

  const OraclePredictor oracle(reference.final_state->field());
  const AccelConfig cfg;
  const RunTrace t = accelerated_solve(phi0, p, cfg, {}, &oracle);
  REQUIRE(t.termination == Termination::converged);
  REQUIRE(t.events.size() == 1);
  const AccelEvent& ev = t.events[0];
  CHECK(ev.decision == AccelDecision::accepted);
  CHECK(ev.k == first_below(t, cfg.eps1_max));
  CHECK(t.iterations - ev.k <= 50);
  CHECK(t.iterations < classical.iterations);
  REQUIRE(ev.input.has_value());
  REQUIRE(ev.output.has_value());
  CHECK(norm_l2(*ev.output) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ev.post_energy <= ev.pre_energy);
  CHECK(t.final_energy == doctest::Approx(classical.final_energy).epsilon(1e-9));
  for (int i = 0; i < static_cast<int>(t.records.size()); ++i) CHECK(t.records[i].k == i);
}

TEST_CASE("random application applies exactly once below eps1") {
  const Grid g = make_grid(20.0, 32);
  const GpeParams p = params(32, 0.4, 100.0);
  const State phi0 = random_state(g, 9);
  const IdentityPredictor id(0.5);
  const RunTrace t = random_apply_solve(phi0, p, 1e-3, 1e-8, {}, &id);
  CHECK(t.termination == Termination::converged);
  REQUIRE(t.events.size() == 1);
  CHECK(t.events[0].decision == AccelDecision::forced);
  CHECK(t.events[0].gnorm < 1e-3);
  CHECK(t.events[0].k == first_below(t, 1e-3 * (1 - 1e-15)));
  CHECK_THROWS_AS(random_apply_solve(phi0, p, 1e-9, 1e-8, {}, &id), Error);
}
