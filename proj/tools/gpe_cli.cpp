// gpeaccel command-line tool: solve, accel-solve, gen-data, bench, plot.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include "CLI11.hpp"
#include "gpeaccel/accelerator.hpp"
#include "gpeaccel/bench.hpp"
#include "gpeaccel/config.hpp"
#include "gpeaccel/dataset.hpp"
#include "gpeaccel/plot.hpp"
#include "gpeaccel/state_io.hpp"

using namespace gpeaccel;

namespace {

struct SolveFlags {
  std::string params_file;
  std::uint64_t seed = 0;
  std::optional<double> tol;
  std::optional<int> max_iters;
  std::string out_trace;
  std::string plot;
  std::string out_state;
};

void add_solve_flags(CLI::App* cmd, SolveFlags& f) {
  cmd->add_option("--params-file", f.params_file, "JSON config {a, n, v1, v2, omega, kappa, tol, accel:{...}}");
  cmd->add_option("--seed", f.seed, "Seed of the random initial state");
  cmd->add_option("--tol", f.tol, "Override the termination tolerance");
  cmd->add_option("--max-iters", f.max_iters, "Override the iteration cap");
  cmd->add_option("--out-trace", f.out_trace, "Write the run trace as JSON lines");
  cmd->add_option("--plot", f.plot, "Write the final density as PPM");
  cmd->add_option("--out-state", f.out_state, "Write the final state (GPST)");
}

SolveConfig resolve(const SolveFlags& f) {
  SolveConfig c = f.params_file.empty() ? parse_config(nlohmann::json::object()) : load_config(f.params_file);
  if (f.tol) c.tol = *f.tol;
  if (f.max_iters) c.max_iters = *f.max_iters;
  return c;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

void emit(const RunTrace& t, const SolveFlags& f) {
  std::printf("termination=%s iterations=%d energy=%.12f lambda=%.12f gnorm=%.3e wall=%.3fs\n",
              to_string(t.termination), t.iterations, t.final_energy, t.lambda, t.final_gnorm, t.wall);
  for (const auto& e : t.events)
    std::printf("event k=%d gnorm=%.3e indicator=%.3e decision=%s%s\n", e.k, e.gnorm, e.indicator,
                to_string(e.decision), e.fallback ? " (fallback)" : "");
  for (const auto& w : t.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  if (!f.out_trace.empty()) write_text(f.out_trace, trace_to_jsonl(t));
  if (!f.plot.empty()) plot_density(t.final_state->field(), f.plot);
  if (!f.out_state.empty()) write_state(t.final_state->field(), f.out_state);
}

std::shared_ptr<const UNet> load_model(const std::string& model, const std::string& spec_path) {
  if (spec_path.empty()) throw Error("--spec is required with an archive model");
  NetworkSpec spec = read_spec_sidecar(spec_path);
  return std::make_shared<const UNet>(spec, read_archive_file(model));
}

int run_solve(const SolveFlags& f) {
  const SolveConfig c = resolve(f);
  EarcgConfig ec;
  ec.tol = c.tol;
  ec.max_iters = c.max_iters;
  const Grid grid = make_grid(c.params.a, c.params.n);
  const RunTrace t = earcg_solve(random_state(grid, f.seed), c.params, ec);
  emit(t, f);
  return t.termination == Termination::converged ? 0 : 2;
}

int run_accel_solve(const SolveFlags& f, const std::string& model, const std::string& spec) {
  SolveConfig c = resolve(f);
  if (f.tol) c.accel.eps2 = *f.tol;
  validate(c.accel);
  const UNetPredictor predictor(load_model(model, spec));
  EarcgConfig ec;
  ec.max_iters = c.max_iters;
  const Grid grid = make_grid(c.params.a, c.params.n);
  const RunTrace t = accelerated_solve(random_state(grid, f.seed), c.params, c.accel, ec, &predictor);
  emit(t, f);
  return t.termination == Termination::converged ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rotating Gross-Pitaevskii ground states with EARCG and learned acceleration"};
  app.require_subcommand(1);

  SolveFlags solve_flags;
  auto* solve = app.add_subcommand("solve", "Plain EARCG from a random initial state");
  add_solve_flags(solve, solve_flags);

  SolveFlags accel_flags;
  std::string model, spec;
  auto* accel = app.add_subcommand("accel-solve", "EARCG with one U-Net correction");
  add_solve_flags(accel, accel_flags);
  accel->add_option("--model", model, "Weight archive (GPUW)")->required();
  accel->add_option("--spec", spec, "Network spec sidecar (JSON)")->required();

  std::string group = "broad", data_out, manifest;
  int runs = 10, data_n = 128;
  std::uint64_t data_seed = 0;
  unsigned data_threads = 0;
  double data_eps2 = 1e-8;
  auto* gen = app.add_subcommand("gen-data", "Generate training samples (GPDS)");
  gen->add_option("--group", group, "Parameter group")->check(CLI::IsMember({"broad", "hard", "mild"}));
  gen->add_option("--runs", runs, "Number of EARCG runs")->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", data_seed, "Batch seed");
  gen->add_option("--out", data_out, "Output dataset path")->required();
  gen->add_option("--n", data_n, "Grid points per axis");
  gen->add_option("--eps2", data_eps2, "Convergence tolerance of the generating runs");
  gen->add_option("--threads", data_threads, "Worker threads (0 = all cores)");
  gen->add_option("--manifest", manifest, "Manifest path (default: <out>.json)");

  std::string cases_path, bench_model = "oracle", bench_spec, mode = "strategy", bench_out, bench_summary,
              bench_params;
  unsigned bench_threads = 1;
  auto* bench_cmd = app.add_subcommand("bench", "Paired classical / accelerated runs");
  bench_cmd->add_option("--cases", cases_path, "Cases JSON (list or {group, count, seed, n})")->required();
  bench_cmd->add_option("--model", bench_model, "Weight archive path, or oracle | identity | zero");
  bench_cmd->add_option("--spec", bench_spec, "Network spec sidecar for an archive model");
  bench_cmd->add_option("--mode", mode, "Acceleration mode")->check(CLI::IsMember({"strategy", "random_apply"}));
  bench_cmd->add_option("--out", bench_out, "JSON-lines records")->required();
  bench_cmd->add_option("--summary-csv", bench_summary, "Summary as CSV");
  bench_cmd->add_option("--params-file", bench_params, "Config supplying tol/accel settings");
  bench_cmd->add_option("--threads", bench_threads, "Worker threads (0 = all cores)");

  std::string state_file, plot_out;
  int scale = 1;
  auto* plot = app.add_subcommand("plot", "Render a state's density as PPM");
  plot->add_option("--state-file", state_file, "State file (GPST)")->required();
  plot->add_option("--out", plot_out, "Output PPM")->required();
  plot->add_option("--scale", scale, "Pixels per sample")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return run_solve(solve_flags);
    if (accel->parsed()) return run_accel_solve(accel_flags, model, spec);

    if (gen->parsed()) {
      GenerateOptions opts;
      opts.eps2 = data_eps2;
      const auto jobs = plan_batch(parse_group(group), runs, data_seed, data_n);
      const auto outcomes = generate_batch(jobs, opts, data_threads);
      std::vector<SamplePoint> samples;
      for (const auto& o : outcomes) {
        if (!o.kept) std::fprintf(stderr, "run %llu skipped: %s\n", static_cast<unsigned long long>(o.run_id),
                                  o.skip_reason.c_str());
        samples.insert(samples.end(), o.samples.begin(), o.samples.end());
      }
      write_dataset(samples, data_out);
      write_text(manifest.empty() ? data_out + ".json" : manifest, batch_manifest(outcomes, opts) + "\n");
      std::printf("%zu samples from %zu runs written to %s\n", samples.size(), outcomes.size(), data_out.c_str());
      return 0;
    }

    if (bench_cmd->parsed()) {
      std::ifstream in(cases_path);
      if (!in) throw Error("cannot open cases file " + cases_path);
      const auto cases = parse_cases(nlohmann::json::parse(in));
      BenchOptions opts;
      opts.mode = parse_mode(mode);
      opts.threads = bench_threads;
      if (!bench_params.empty()) {
        const SolveConfig c = load_config(bench_params);
        opts.accel = c.accel;
        opts.earcg.max_iters = c.max_iters;
      }
      PredictorFactory factory;
      if (bench_model == "oracle") {
        factory = [](const BenchCase&, const RunTrace& classical) -> std::shared_ptr<const Predictor> {
          return std::make_shared<OraclePredictor>(classical.final_state->field());
        };
      } else if (bench_model == "identity") {
        factory = [](const BenchCase&, const RunTrace&) -> std::shared_ptr<const Predictor> {
          return std::make_shared<IdentityPredictor>(1.0);
        };
      } else if (bench_model == "zero") {
        factory = [](const BenchCase&, const RunTrace&) -> std::shared_ptr<const Predictor> {
          return std::make_shared<IdentityPredictor>(0.0);
        };
      } else {
        auto shared = std::make_shared<const UNetPredictor>(load_model(bench_model, bench_spec));
        factory = [shared](const BenchCase&, const RunTrace&) -> std::shared_ptr<const Predictor> { return shared; };
      }
      const auto records = bench(cases, factory, opts);
      write_text(bench_out, to_jsonl(records));
      for (const auto& r : records)
        if (!r.ok()) std::fprintf(stderr, "case %d failed: %s\n", r.case_id, r.error.c_str());
      const BenchSummary s = summarize(records);
      if (!bench_summary.empty()) write_text(bench_summary, summary_csv(s));
      std::printf("%s\n", to_json(s).dump(2).c_str());
      return 0;
    }

    if (plot->parsed()) {
      plot_density(read_state(state_file), plot_out, scale);
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
