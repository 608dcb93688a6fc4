// Paired classical / accelerated benchmark runs and their metrics.
#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gpeaccel/accelerator.hpp"
#include "gpeaccel/dataset.hpp"
#include "json.hpp"

namespace gpeaccel {

/// Cell-area weighted L1 distance of the densities |phi|^2 and |ref|^2.
double density_l1_error(const Field& phi, const Field& ref);

/// (||rho_in - rho*|| - ||rho_out - rho*||) / ||rho_in - rho*|| in L1;
/// nullopt when the denominator vanishes.
std::optional<double> impr_rho(const Field& phi_in, const Field& phi_out, const Field& phi_ref);

struct BenchCase {
  int id = 0;
  std::uint64_t seed = 0;
  GpeParams params;
};

/// Cases drawn like a generation batch (ids 0..count-1).
std::vector<BenchCase> make_cases(ParamGroup group, int count, std::uint64_t seed, int n = 64);

/// Either a list of {id, seed, a, n, v1, v2, omega, kappa} objects or a
/// generator object {group, count, seed, n}.
std::vector<BenchCase> parse_cases(const nlohmann::json& j);

enum class BenchMode { strategy, random_apply };
const char* to_string(BenchMode m);
BenchMode parse_mode(const std::string& s);

struct RunSummary {
  int iterations = 0;
  double wall = 0.0;
  double energy = 0.0;
  double lambda = 0.0;
  std::string termination;
};

struct EventSummary {
  int k = 0;
  double gnorm = 0.0;
  double indicator = 0.0;
  std::string decision;
  bool fallback = false;
};

struct BenchRecord {
  int case_id = 0;
  std::uint64_t seed = 0;
  GpeParams params;
  std::string mode;
  std::optional<double> eps1;  // random_apply only
  RunSummary classical;
  RunSummary accelerated;
  std::optional<double> impr_rho;
  bool same_minimum = false;
  std::vector<EventSummary> events;
  std::string error;  // non-empty: the case failed, other fields partial

  bool ok() const { return error.empty(); }
};

nlohmann::json to_json(const BenchRecord& r);
BenchRecord record_from_json(const nlohmann::json& j);

/// Builds the predictor for one case; `classical` is the finished paired
/// classical run (an oracle double takes its final state).
using PredictorFactory = std::function<std::shared_ptr<const Predictor>(const BenchCase&, const RunTrace& classical)>;

struct BenchOptions {
  BenchMode mode = BenchMode::strategy;
  AccelConfig accel;
  EarcgConfig earcg;
  unsigned threads = 1;
  double same_minimum_tol = 1e-8;
};

/// Runs classical EARCG and the selected accelerated mode from the same
/// random_state(seed). random_apply draws eps1 log-uniformly from
/// [eps1_min, eps1_max] with a generator seeded by the case seed. Failures are
/// recorded per case. Output is ordered by case id.
std::vector<BenchRecord> bench(const std::vector<BenchCase>& cases, const PredictorFactory& factory,
                               const BenchOptions& opts);

/// Runs one case (used by bench).
BenchRecord bench_case(const BenchCase& c, const PredictorFactory& factory, const BenchOptions& opts);

struct Stat {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  bool operator==(const Stat&) const = default;
};

struct BenchSummary {
  std::size_t cases = 0;
  std::size_t failed = 0;
  Stat iterations_saved;
  Stat percent_iterations_saved;
  Stat percent_wall_saved;
  Stat impr_rho;
  double improvement_rate_iterations = 0.0;  // share with fewer iterations
  double improvement_rate_wall = 0.0;
  double improvement_rate_rho = 0.0;  // share of defined impr_rho that are > 0
  double same_minimum_rate = 0.0;
  bool operator==(const BenchSummary&) const = default;
};

/// Pure aggregation over successful records.
BenchSummary summarize(const std::vector<BenchRecord>& records);
nlohmann::json to_json(const BenchSummary& s);
/// Header line plus one value line.
std::string summary_csv(const BenchSummary& s);

/// One JSON object per line.
std::string to_jsonl(const std::vector<BenchRecord>& records);
std::vector<BenchRecord> from_jsonl(const std::string& text);

}  // namespace gpeaccel
