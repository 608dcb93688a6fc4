#include "gpeaccel/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace gpeaccel {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw Error("unknown config key '" + where + it.key() + "'");
}

template <typename T>
void take(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace

SolveConfig parse_config(const json& j) {
  if (!j.is_object()) throw Error("config must be a JSON object");
  reject_unknown(j, {"a", "n", "v1", "v2", "omega", "kappa", "tol", "max_iters", "accel"}, "");
  SolveConfig c;
  try {
    take(j, "a", c.params.a);
    take(j, "n", c.params.n);
    take(j, "v1", c.params.v1);
    take(j, "v2", c.params.v2);
    take(j, "omega", c.params.omega);
    take(j, "kappa", c.params.kappa);
    take(j, "tol", c.tol);
    take(j, "max_iters", c.max_iters);
    if (j.contains("accel")) {
      const json& a = j.at("accel");
      if (!a.is_object()) throw Error("config key 'accel' must be an object");
      reject_unknown(a, {"eps1_min", "eps1_max", "eps2", "n_e", "e0"}, "accel.");
      take(a, "eps1_min", c.accel.eps1_min);
      take(a, "eps1_max", c.accel.eps1_max);
      take(a, "eps2", c.accel.eps2);
      take(a, "n_e", c.accel.n_e);
      take(a, "e0", c.accel.e0);
    }
  } catch (const json::exception& e) {
    throw Error(std::string("invalid config value: ") + e.what());
  }
  validate(c.params);
  validate(c.accel);
  if (!(c.tol > 0.0)) throw Error("tol must be positive");
  if (c.max_iters < 1) throw Error("max_iters must be >= 1");
  return c;
}

SolveConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("malformed config " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

json to_json(const SolveConfig& c) {
  return {{"a", c.params.a},
          {"n", c.params.n},
          {"v1", c.params.v1},
          {"v2", c.params.v2},
          {"omega", c.params.omega},
          {"kappa", c.params.kappa},
          {"tol", c.tol},
          {"max_iters", c.max_iters},
          {"accel",
           {{"eps1_min", c.accel.eps1_min},
            {"eps1_max", c.accel.eps1_max},
            {"eps2", c.accel.eps2},
            {"n_e", c.accel.n_e},
            {"e0", c.accel.e0}}}};
}

std::string trace_to_jsonl(const RunTrace& t) {
  std::ostringstream o;
  for (const auto& r : t.records) {
    o << json{{"k", r.k},
              {"energy", r.energy},
              {"gnorm", r.gnorm},
              {"tau", r.tau},
              {"beta", r.beta},
              {"wall", r.wall},
              {"backtracks", r.backtracks},
              {"refinements", r.refinements},
              {"restarted", r.restarted},
              {"event", to_string(r.event)}}
             .dump()
      << '\n';
  }
  for (const auto& e : t.events) {
    json ev = {{"k", e.k},
               {"gnorm", e.gnorm},
               {"indicator", e.indicator},
               {"decision", to_string(e.decision)},
               {"pre_energy", e.pre_energy},
               {"post_energy", e.post_energy},
               {"fallback", e.fallback}};
    if (e.pre_density_error) ev["pre_density_error"] = *e.pre_density_error;
    if (e.post_density_error) ev["post_density_error"] = *e.post_density_error;
    o << json{{"event", ev}}.dump() << '\n';
  }
  o << json{{"final",
             {{"iterations", t.iterations},
              {"energy", t.final_energy},
              {"lambda", t.lambda},
              {"gnorm", t.final_gnorm},
              {"wall", t.wall},
              {"termination", to_string(t.termination)},
              {"warnings", t.warnings}}}}
           .dump()
    << '\n';
  return o.str();
}

}  // namespace gpeaccel
