#include "gpeaccel/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

namespace gpeaccel {

using nlohmann::json;

double density_l1_error(const Field& phi, const Field& ref) {
  require_same_grid(phi, ref);
  const auto a = to_real(phi);
  const auto b = to_real(ref);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(std::norm(a[i]) - std::norm(b[i]));
  return s * phi.grid().cell_area();
}

std::optional<double> impr_rho(const Field& phi_in, const Field& phi_out, const Field& phi_ref) {
  const double before = density_l1_error(phi_in, phi_ref);
  if (!(before > 0.0)) return std::nullopt;
  return (before - density_l1_error(phi_out, phi_ref)) / before;
}

std::vector<BenchCase> make_cases(ParamGroup group, int count, std::uint64_t seed, int n) {
  std::vector<BenchCase> out;
  for (const auto& job : plan_batch(group, count, seed, n))
    out.push_back(BenchCase{static_cast<int>(job.run_id), job.seed, job.params});
  return out;
}

std::vector<BenchCase> parse_cases(const json& j) {
  if (j.is_object()) {
    return make_cases(parse_group(j.value("group", std::string("mild"))), j.at("count").get<int>(),
                      j.value("seed", std::uint64_t{0}), j.value("n", 64));
  }
  if (!j.is_array()) throw Error("cases must be an array or a generator object");
  std::vector<BenchCase> out;
  for (const auto& c : j) {
    BenchCase bc;
    bc.id = c.at("id").get<int>();
    bc.seed = c.at("seed").get<std::uint64_t>();
    bc.params.a = c.value("a", 20.0);
    bc.params.n = c.value("n", 64);
    bc.params.v1 = c.value("v1", 1.0);
    bc.params.v2 = c.value("v2", 1.0);
    bc.params.omega = c.value("omega", 0.0);
    bc.params.kappa = c.value("kappa", 0.0);
    validate(bc.params);
    out.push_back(bc);
  }
  return out;
}

const char* to_string(BenchMode m) { return m == BenchMode::strategy ? "strategy" : "random_apply"; }

BenchMode parse_mode(const std::string& s) {
  if (s == "strategy") return BenchMode::strategy;
  if (s == "random_apply") return BenchMode::random_apply;
  throw Error("unknown bench mode '" + s + "' (strategy|random_apply)");
}

namespace {

RunSummary summary_of(const RunTrace& t) {
  return RunSummary{t.iterations, t.wall, t.final_energy, t.lambda, to_string(t.termination)};
}

json params_json(const GpeParams& p) {
  return {{"a", p.a}, {"n", p.n}, {"v1", p.v1}, {"v2", p.v2}, {"omega", p.omega}, {"kappa", p.kappa}};
}

GpeParams params_from(const json& j) {
  GpeParams p;
  p.a = j.at("a").get<double>();
  p.n = j.at("n").get<int>();
  p.v1 = j.at("v1").get<double>();
  p.v2 = j.at("v2").get<double>();
  p.omega = j.at("omega").get<double>();
  p.kappa = j.at("kappa").get<double>();
  return p;
}

json run_json(const RunSummary& r) {
  return {{"iterations", r.iterations},
          {"wall", r.wall},
          {"energy", r.energy},
          {"lambda", r.lambda},
          {"termination", r.termination}};
}

RunSummary run_from(const json& j) {
  return RunSummary{j.at("iterations").get<int>(), j.at("wall").get<double>(), j.at("energy").get<double>(),
                    j.at("lambda").get<double>(), j.at("termination").get<std::string>()};
}

template <typename T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

std::optional<double> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

Stat stat_of(std::vector<double> v) {
  Stat s;
  s.count = v.size();
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  s.median = v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  return s;
}

json stat_json(const Stat& s) { return {{"count", s.count}, {"mean", s.mean}, {"median", s.median}}; }

}  // namespace

json to_json(const BenchRecord& r) {
  json ev = json::array();
  for (const auto& e : r.events)
    ev.push_back({{"k", e.k},
                  {"gnorm", e.gnorm},
                  {"indicator", e.indicator},
                  {"decision", e.decision},
                  {"fallback", e.fallback}});
  json j = {{"case_id", r.case_id},
            {"seed", r.seed},
            {"params", params_json(r.params)},
            {"mode", r.mode},
            {"eps1", opt_json(r.eps1)},
            {"classical", run_json(r.classical)},
            {"accelerated", run_json(r.accelerated)},
            {"impr_rho", opt_json(r.impr_rho)},
            {"same_minimum", r.same_minimum},
            {"events", ev}};
  if (!r.ok()) j["error"] = r.error;
  return j;
}

BenchRecord record_from_json(const json& j) {
  BenchRecord r;
  r.case_id = j.at("case_id").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.params = params_from(j.at("params"));
  r.mode = j.at("mode").get<std::string>();
  r.eps1 = opt_from(j, "eps1");
  r.classical = run_from(j.at("classical"));
  r.accelerated = run_from(j.at("accelerated"));
  r.impr_rho = opt_from(j, "impr_rho");
  r.same_minimum = j.at("same_minimum").get<bool>();
  for (const auto& e : j.at("events"))
    r.events.push_back(EventSummary{e.at("k").get<int>(), e.at("gnorm").get<double>(),
                                    e.at("indicator").get<double>(), e.at("decision").get<std::string>(),
                                    e.at("fallback").get<bool>()});
  r.error = j.value("error", std::string());
  return r;
}

BenchRecord bench_case(const BenchCase& c, const PredictorFactory& factory, const BenchOptions& opts) {
  BenchRecord rec;
  rec.case_id = c.id;
  rec.seed = c.seed;
  rec.params = c.params;
  rec.mode = to_string(opts.mode);
  try {
    validate(c.params);
    const Grid grid = make_grid(c.params.a, c.params.n);
    const State phi0 = random_state(grid, c.seed);

    EarcgConfig ec = opts.earcg;
    ec.tol = opts.accel.eps2;
    ec.callback = nullptr;
    const RunTrace classical = earcg_solve(phi0, c.params, ec);
    rec.classical = summary_of(classical);

    const std::shared_ptr<const Predictor> predictor = factory ? factory(c, classical) : nullptr;
    RunTrace acc;
    if (opts.mode == BenchMode::strategy) {
      acc = accelerated_solve(phi0, c.params, opts.accel, ec, predictor.get());
    } else {
      std::mt19937_64 rng(c.seed ^ 0x5bd1e995u);
      std::uniform_real_distribution<double> u(std::log(opts.accel.eps1_min), std::log(opts.accel.eps1_max));
      rec.eps1 = std::exp(u(rng));
      acc = random_apply_solve(phi0, c.params, *rec.eps1, opts.accel.eps2, ec, predictor.get());
    }
    rec.accelerated = summary_of(acc);
    rec.same_minimum = std::abs(classical.final_energy - acc.final_energy) < opts.same_minimum_tol;

    for (const auto& e : acc.events) {
      rec.events.push_back(EventSummary{e.k, e.gnorm, e.indicator, to_string(e.decision), e.fallback});
      if (e.input && e.output && classical.termination == Termination::converged)
        rec.impr_rho = impr_rho(*e.input, *e.output, classical.final_state->field());
    }
  } catch (const std::exception& e) {
    rec.error = e.what();
  }
  return rec;
}

std::vector<BenchRecord> bench(const std::vector<BenchCase>& cases, const PredictorFactory& factory,
                               const BenchOptions& opts) {
  validate(opts.accel);
  unsigned threads = opts.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : opts.threads;
  threads = std::min<unsigned>(threads, std::max<std::size_t>(1, cases.size()));
  std::vector<BenchRecord> out(cases.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cases.size(); i = next++) out[i] = bench_case(cases[i], factory, opts);
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  std::sort(out.begin(), out.end(), [](const BenchRecord& x, const BenchRecord& y) { return x.case_id < y.case_id; });
  return out;
}

BenchSummary summarize(const std::vector<BenchRecord>& records) {
  BenchSummary s;
  std::vector<double> saved, pct, wall, rho;
  std::size_t better_it = 0, better_wall = 0, better_rho = 0, same = 0;
  for (const auto& r : records) {
    if (!r.ok()) {
      ++s.failed;
      continue;
    }
    ++s.cases;
    const int d = r.classical.iterations - r.accelerated.iterations;
    saved.push_back(d);
    if (r.classical.iterations > 0) pct.push_back(100.0 * d / r.classical.iterations);
    if (r.classical.wall > 0.0) wall.push_back(100.0 * (r.classical.wall - r.accelerated.wall) / r.classical.wall);
    if (r.impr_rho) {
      rho.push_back(*r.impr_rho);
      better_rho += *r.impr_rho > 0.0;
    }
    better_it += d > 0;
    better_wall += r.accelerated.wall < r.classical.wall;
    same += r.same_minimum;
  }
  s.iterations_saved = stat_of(saved);
  s.percent_iterations_saved = stat_of(pct);
  s.percent_wall_saved = stat_of(wall);
  s.impr_rho = stat_of(rho);
  if (s.cases) {
    const double n = static_cast<double>(s.cases);
    s.improvement_rate_iterations = better_it / n;
    s.improvement_rate_wall = better_wall / n;
    s.same_minimum_rate = same / n;
  }
  if (!rho.empty()) s.improvement_rate_rho = better_rho / static_cast<double>(rho.size());
  return s;
}

json to_json(const BenchSummary& s) {
  return {{"cases", s.cases},
          {"failed", s.failed},
          {"iterations_saved", stat_json(s.iterations_saved)},
          {"percent_iterations_saved", stat_json(s.percent_iterations_saved)},
          {"percent_wall_saved", stat_json(s.percent_wall_saved)},
          {"impr_rho", stat_json(s.impr_rho)},
          {"improvement_rate_iterations", s.improvement_rate_iterations},
          {"improvement_rate_wall", s.improvement_rate_wall},
          {"improvement_rate_rho", s.improvement_rate_rho},
          {"same_minimum_rate", s.same_minimum_rate}};
}

std::string summary_csv(const BenchSummary& s) {
  std::ostringstream o;
  o.precision(17);
  o << "cases,failed,iterations_saved_mean,iterations_saved_median,percent_iterations_saved_mean,"
       "percent_iterations_saved_median,percent_wall_saved_mean,percent_wall_saved_median,impr_rho_mean,"
       "impr_rho_median,improvement_rate_iterations,improvement_rate_wall,improvement_rate_rho,same_minimum_rate\n";
  o << s.cases << ',' << s.failed << ',' << s.iterations_saved.mean << ',' << s.iterations_saved.median << ','
    << s.percent_iterations_saved.mean << ',' << s.percent_iterations_saved.median << ','
    << s.percent_wall_saved.mean << ',' << s.percent_wall_saved.median << ',' << s.impr_rho.mean << ','
    << s.impr_rho.median << ',' << s.improvement_rate_iterations << ',' << s.improvement_rate_wall << ','
    << s.improvement_rate_rho << ',' << s.same_minimum_rate << '\n';
  return o.str();
}

std::string to_jsonl(const std::vector<BenchRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<BenchRecord> from_jsonl(const std::string& text) {
  std::vector<BenchRecord> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(record_from_json(json::parse(line)));
  }
  return out;
}

}  // namespace gpeaccel
