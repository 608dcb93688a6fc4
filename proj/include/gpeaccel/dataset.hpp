// Training-data generation and the GPDS sample container.
//
// GPDS layout (little-endian):
//   "GPDS" | u32 version (1) | u64 sample count | u32 n
//   per sample: f64 a, v1, v2, omega, kappa, tolerance | u64 run id | u8 j
//               | phi_j, g_j, phi_star as (n, n, 2) f32, real space
// Channel pairs are (Re, Im), matching prepare_input.
#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gpeaccel/earcg.hpp"

namespace gpeaccel {

class DatasetError : public Error {
 public:
  using Error::Error;
};

inline constexpr std::uint32_t kDatasetVersion = 1;

struct SamplePoint {
  GpeParams params;
  double tolerance = 0.0;
  std::uint64_t run_id = 0;
  std::uint8_t j = 0;  // 1-based schedule index
  std::vector<float> phi;
  std::vector<float> g;
  std::vector<float> phi_star;
  bool operator==(const SamplePoint& o) const;
};

/// eps_j = exp((1 - t) ln eps_max + t ln eps_min), t = (j - 1)/(m - 1);
/// the endpoints are returned as eps_max and eps_min exactly.
std::vector<double> tolerance_schedule(double eps_min, double eps_max, int m = 20);

/// broad: kappa in [200, 1000], omega in [0.8, 1.6], v1 in [1, 2].
/// hard:  kappa in [600, 1000], omega in [1.2, 1.6], v1 in [1, 2].
/// mild:  kappa in [50, 200],   omega in [0.3, 0.6], v1 in [1, 2] (desk scale).
/// a = 20 and v2 = 1 throughout.
enum class ParamGroup { broad, hard, mild };
const char* to_string(ParamGroup g);
ParamGroup parse_group(const std::string& s);

GpeParams sample_params(std::mt19937_64& rng, ParamGroup group, int n = 64);

struct GenerateOptions {
  double eps1_min = 1e-4;
  double eps1_max = 1e-1;
  double eps2 = 1e-8;
  int m = 20;
  EarcgConfig earcg;  // tol is overridden by eps2
};

struct RunOutcome {
  std::uint64_t run_id = 0;
  std::uint64_t seed = 0;
  GpeParams params;
  bool kept = false;
  std::string skip_reason;
  int iterations = 0;
  double final_energy = 0.0;
  std::vector<SamplePoint> samples;
};

/// EARCG from random_state(seed) to eps2, capturing (phi, g) the first time
/// ||g||_a drops below each scheduled tolerance. Solver failures and
/// non-converged runs come back with kept = false and a reason.
RunOutcome generate_run(const GpeParams& params, std::uint64_t seed, std::uint64_t run_id,
                        const GenerateOptions& opts = {});

struct BatchJob {
  std::uint64_t run_id;
  std::uint64_t seed;
  GpeParams params;
};

/// `runs` jobs with parameters drawn from `group` and per-run seeds, all
/// derived from `seed`.
std::vector<BatchJob> plan_batch(ParamGroup group, int runs, std::uint64_t seed, int n = 64);

/// Runs jobs on `threads` workers (0 = hardware concurrency); results are
/// ordered by run id.
std::vector<RunOutcome> generate_batch(const std::vector<BatchJob>& jobs, const GenerateOptions& opts,
                                       unsigned threads = 0);

std::vector<std::uint8_t> encode_dataset(std::span<const SamplePoint> samples);
std::vector<SamplePoint> decode_dataset(std::span<const std::uint8_t> bytes);
void write_dataset(std::span<const SamplePoint> samples, const std::filesystem::path& path);
std::vector<SamplePoint> read_dataset(const std::filesystem::path& path);

/// JSON manifest: seeds, params, skip reasons, sample counts.
std::string batch_manifest(const std::vector<RunOutcome>& outcomes, const GenerateOptions& opts);

}  // namespace gpeaccel
