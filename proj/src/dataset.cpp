#include "gpeaccel/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "binary_io.hpp"
#include "json.hpp"

namespace gpeaccel {

bool SamplePoint::operator==(const SamplePoint& o) const {
  auto same_params = [](const GpeParams& x, const GpeParams& y) {
    return x.a == y.a && x.n == y.n && x.v1 == y.v1 && x.v2 == y.v2 && x.omega == y.omega && x.kappa == y.kappa;
  };
  return same_params(params, o.params) && tolerance == o.tolerance && run_id == o.run_id && j == o.j &&
         phi == o.phi && g == o.g && phi_star == o.phi_star;
}

std::vector<double> tolerance_schedule(double eps_min, double eps_max, int m) {
  if (!(eps_min > 0.0 && eps_min < eps_max)) throw Error("tolerance schedule needs 0 < eps_min < eps_max");
  if (m < 2) throw Error("tolerance schedule needs m >= 2");
  const double lmax = std::log(eps_max), lmin = std::log(eps_min);
  std::vector<double> out(m);
  for (int j = 1; j <= m; ++j) {
    const double t = static_cast<double>(j - 1) / (m - 1);
    out[j - 1] = std::exp((1.0 - t) * lmax + t * lmin);
  }
  out.front() = eps_max;
  out.back() = eps_min;
  return out;
}

const char* to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::broad: return "broad";
    case ParamGroup::hard: return "hard";
    case ParamGroup::mild: return "mild";
  }
  return "?";
}

ParamGroup parse_group(const std::string& s) {
  if (s == "broad") return ParamGroup::broad;
  if (s == "hard") return ParamGroup::hard;
  if (s == "mild") return ParamGroup::mild;
  throw Error("unknown parameter group '" + s + "' (broad|hard|mild)");
}

GpeParams sample_params(std::mt19937_64& rng, ParamGroup group, int n) {
  double k_lo = 200, k_hi = 1000, w_lo = 0.8, w_hi = 1.6;
  if (group == ParamGroup::hard) {
    k_lo = 600;
    w_lo = 1.2;
  } else if (group == ParamGroup::mild) {
    k_lo = 50;
    k_hi = 200;
    w_lo = 0.3;
    w_hi = 0.6;
  }
  std::uniform_real_distribution<double> kappa(k_lo, k_hi), omega(w_lo, w_hi), v1(1.0, 2.0);
  GpeParams p;
  p.a = 20.0;
  p.n = n;
  p.v2 = 1.0;
  p.kappa = kappa(rng);
  p.omega = omega(rng);
  p.v1 = v1(rng);
  return p;
}

namespace {

std::vector<float> real_pairs(const Field& f) {
  const auto samples = to_real(f);
  std::vector<float> out(samples.size() * 2);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out[2 * i] = static_cast<float>(samples[i].real());
    out[2 * i + 1] = static_cast<float>(samples[i].imag());
  }
  return out;
}

}  // namespace

RunOutcome generate_run(const GpeParams& params, std::uint64_t seed, std::uint64_t run_id,
                        const GenerateOptions& opts) {
  RunOutcome out;
  out.run_id = run_id;
  out.seed = seed;
  out.params = params;
  const auto schedule = tolerance_schedule(opts.eps1_min, opts.eps1_max, opts.m);

  struct Capture {
    std::vector<float> phi, g;
  };
  std::vector<std::optional<Capture>> captured(schedule.size());
  bool below_floor_at_start = false;

  EarcgConfig cfg = opts.earcg;
  cfg.tol = opts.eps2;
  auto user_cb = cfg.callback;
  cfg.callback = [&](const IterationView& v) {
    if (user_cb) user_cb(v);
    if (v.k == 0 && v.gnorm < opts.eps1_min) below_floor_at_start = true;
    if (below_floor_at_start) return;
    for (std::size_t j = 0; j < schedule.size(); ++j) {
      if (!captured[j] && v.gnorm < schedule[j]) captured[j] = Capture{real_pairs(v.phi.field()), real_pairs(v.g.field())};
    }
  };

  RunTrace trace;
  try {
    validate(params);
    const Grid grid = make_grid(params.a, params.n);
    trace = earcg_solve(random_state(grid, seed), params, cfg);
  } catch (const std::exception& e) {
    out.skip_reason = std::string("solver error: ") + e.what();
    return out;
  }
  out.iterations = trace.iterations;
  out.final_energy = trace.final_energy;
  if (below_floor_at_start) {
    out.skip_reason = "initial gradient norm already below eps1_min";
    return out;
  }
  if (trace.termination != Termination::converged) {
    out.skip_reason = std::string("not converged (") + to_string(trace.termination) + ")";
    return out;
  }
  for (const auto& c : captured) {
    if (!c) {
      out.skip_reason = "tolerance schedule not fully captured";
      return out;
    }
  }
  const std::vector<float> star = real_pairs(trace.final_state->field());
  for (std::size_t j = 0; j < schedule.size(); ++j) {
    SamplePoint s;
    s.params = params;
    s.tolerance = schedule[j];
    s.run_id = run_id;
    s.j = static_cast<std::uint8_t>(j + 1);
    s.phi = std::move(captured[j]->phi);
    s.g = std::move(captured[j]->g);
    s.phi_star = star;
    out.samples.push_back(std::move(s));
  }
  out.kept = true;
  return out;
}

std::vector<BatchJob> plan_batch(ParamGroup group, int runs, std::uint64_t seed, int n) {
  if (runs < 0) throw Error("run count must be nonnegative");
  std::mt19937_64 rng(seed);
  std::vector<BatchJob> jobs;
  for (int i = 0; i < runs; ++i) {
    BatchJob job;
    job.run_id = static_cast<std::uint64_t>(i);
    job.params = sample_params(rng, group, n);
    job.seed = rng();
    jobs.push_back(job);
  }
  return jobs;
}

std::vector<RunOutcome> generate_batch(const std::vector<BatchJob>& jobs, const GenerateOptions& opts,
                                       unsigned threads) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, std::max<std::size_t>(1, jobs.size()));
  std::vector<RunOutcome> out(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++)
      out[i] = generate_run(jobs[i].params, jobs[i].seed, jobs[i].run_id, opts);
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  std::sort(out.begin(), out.end(), [](const RunOutcome& x, const RunOutcome& y) { return x.run_id < y.run_id; });
  return out;
}

std::vector<std::uint8_t> encode_dataset(std::span<const SamplePoint> samples) {
  const std::uint32_t n = samples.empty() ? 0 : static_cast<std::uint32_t>(samples.front().params.n);
  const std::size_t len = static_cast<std::size_t>(n) * n * 2;
  io::Writer w;
  w.bytes("GPDS", 4);
  w.u32(kDatasetVersion);
  w.u64(samples.size());
  w.u32(n);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const SamplePoint& s = samples[i];
    if (static_cast<std::uint32_t>(s.params.n) != n)
      throw DatasetError("sample " + std::to_string(i) + " has n = " + std::to_string(s.params.n) +
                         ", file uses n = " + std::to_string(n));
    if (s.phi.size() != len || s.g.size() != len || s.phi_star.size() != len)
      throw DatasetError("sample " + std::to_string(i) + " arrays are not (n, n, 2)");
    w.f64(s.params.a);
    w.f64(s.params.v1);
    w.f64(s.params.v2);
    w.f64(s.params.omega);
    w.f64(s.params.kappa);
    w.f64(s.tolerance);
    w.u64(s.run_id);
    w.u8(s.j);
    w.f32s(s.phi);
    w.f32s(s.g);
    w.f32s(s.phi_star);
  }
  return std::move(w.buffer());
}

std::vector<SamplePoint> decode_dataset(std::span<const std::uint8_t> bytes) {
  io::Reader<DatasetError> r(bytes);
  if (bytes.size() < 4) r.fail("truncated data reading magic");
  if (r.str(4, "magic") != "GPDS") throw DatasetError("bad dataset magic at byte offset 0");
  const std::uint32_t version = r.u32("version");
  if (version != kDatasetVersion)
    throw DatasetError("unsupported dataset version " + std::to_string(version) + " at byte offset 4");
  const std::uint64_t count = r.u64("sample count");
  const std::uint32_t n = r.u32("grid size");
  const std::size_t len = static_cast<std::size_t>(n) * n * 2;
  const std::size_t record = 6 * 8 + 8 + 1 + 3 * len * 4;
  if (r.remaining() / record < count)
    r.fail("truncated data: header declares " + std::to_string(count) + " samples");
  std::vector<SamplePoint> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    SamplePoint s;
    s.params.n = static_cast<int>(n);
    s.params.a = r.f64("a");
    s.params.v1 = r.f64("v1");
    s.params.v2 = r.f64("v2");
    s.params.omega = r.f64("omega");
    s.params.kappa = r.f64("kappa");
    s.tolerance = r.f64("tolerance");
    s.run_id = r.u64("run id");
    s.j = r.u8("j");
    s.phi.resize(len);
    s.g.resize(len);
    s.phi_star.resize(len);
    r.f32s(s.phi, "phi_j");
    r.f32s(s.g, "g_j");
    r.f32s(s.phi_star, "phi_star");
    out.push_back(std::move(s));
  }
  if (r.remaining() != 0) r.fail("trailing bytes after " + std::to_string(count) + " samples");
  return out;
}

void write_dataset(std::span<const SamplePoint> samples, const std::filesystem::path& path) {
  io::write_file(path, encode_dataset(samples));
}

std::vector<SamplePoint> read_dataset(const std::filesystem::path& path) {
  return decode_dataset(io::read_file(path));
}

std::string batch_manifest(const std::vector<RunOutcome>& outcomes, const GenerateOptions& opts) {
  nlohmann::json runs = nlohmann::json::array();
  std::size_t kept = 0, samples = 0;
  for (const auto& o : outcomes) {
    nlohmann::json r = {{"run_id", o.run_id},
                        {"seed", o.seed},
                        {"params",
                         {{"a", o.params.a},
                          {"n", o.params.n},
                          {"v1", o.params.v1},
                          {"v2", o.params.v2},
                          {"omega", o.params.omega},
                          {"kappa", o.params.kappa}}},
                        {"kept", o.kept},
                        {"iterations", o.iterations},
                        {"samples", o.samples.size()}};
    if (!o.kept) r["skip_reason"] = o.skip_reason;
    kept += o.kept;
    samples += o.samples.size();
    runs.push_back(std::move(r));
  }
  nlohmann::json m = {{"eps1_min", opts.eps1_min}, {"eps1_max", opts.eps1_max}, {"eps2", opts.eps2},
                      {"m", opts.m},               {"runs_total", outcomes.size()}, {"runs_kept", kept},
                      {"samples", samples},        {"runs", runs}};
  return m.dump(2);
}

}  // namespace gpeaccel
