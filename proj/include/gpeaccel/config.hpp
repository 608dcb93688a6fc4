// Run configuration and trace serialization used by the command-line tool.
//
// Config JSON: {a, n, v1, v2, omega, kappa, tol, max_iters,
//               accel: {eps1_min, eps1_max, eps2, n_e, e0}}
// Every key is optional; unknown keys are rejected.
#pragma once

#include <filesystem>
#include <string>

#include "gpeaccel/accelerator.hpp"
#include "json.hpp"

namespace gpeaccel {

struct SolveConfig {
  GpeParams params{20.0, 128, 1.0, 1.0, 0.0, 0.0};
  double tol = 1e-8;
  int max_iters = 30000;
  AccelConfig accel;
};

SolveConfig parse_config(const nlohmann::json& j);
SolveConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const SolveConfig& c);

/// One line per iteration {k, energy, gnorm, tau, beta, wall, backtracks,
/// refinements, restarted, event}, one per acceleration event
/// {"event": {...}}, then {"final": {...}}.
std::string trace_to_jsonl(const RunTrace& t);

}  // namespace gpeaccel
