// Per-run records shared by the solver, the accelerator and the bench.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gpeaccel/field.hpp"

namespace gpeaccel {

enum class EventTag { plain, nn_applied, nn_rejected, nn_forced };
enum class Termination { converged, max_iters, stagnation };
enum class AccelDecision { accepted, rejected, forced };

const char* to_string(EventTag t);
const char* to_string(Termination t);
const char* to_string(AccelDecision d);

struct IterationRecord {
  int k = 0;
  double energy = 0.0;
  double gnorm = 0.0;  // ||g^(k)||_a
  double tau = 0.0;    // step used to leave iterate k (0 for the last one)
  double beta = 0.0;
  double fr = 0.0;     // Fletcher-Reeves ratio beta was capped by
  double wall = 0.0;   // seconds since solve start
  int backtracks = 0;
  int refinements = 0;     // tighter inner re-solves at this iterate
  bool restarted = false;  // direction reset to -g before the step
  EventTag event = EventTag::plain;
};

struct AccelEvent {
  int k = 0;
  double gnorm = 0.0;
  double indicator = 0.0;
  AccelDecision decision = AccelDecision::rejected;
  double pre_energy = 0.0;
  double post_energy = 0.0;
  bool fallback = false;  // application failed, run continued as plain EARCG
  std::optional<double> pre_density_error;
  std::optional<double> post_density_error;
  /// Iterate handed to the predictor and the normalized candidate that
  /// replaced it; kept only for accepted/forced applications.
  std::optional<Field> input;
  std::optional<Field> output;
};

struct RunTrace {
  std::vector<IterationRecord> records;
  std::vector<AccelEvent> events;
  std::vector<std::string> warnings;
  StatePtr final_state;
  double final_energy = 0.0;
  double lambda = 0.0;
  double final_gnorm = 0.0;
  int iterations = 0;
  double wall = 0.0;
  Termination termination = Termination::max_iters;
};

}  // namespace gpeaccel
