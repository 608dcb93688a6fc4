#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gpeaccel/accelerator.hpp"
#include "gpeaccel/dataset.hpp"
#include "gpeaccel/state_io.hpp"

namespace py = pybind11;
using namespace gpeaccel;

namespace {

using CArray = py::array_t<cplx, py::array::c_style | py::array::forcecast>;
using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

Field field_from(const Grid& g, const CArray& a) {
  if (a.ndim() != 2 || a.shape(0) != g.n() || a.shape(1) != g.n())
    throw ShapeError("expected a complex (" + std::to_string(g.n()) + ", " + std::to_string(g.n()) + ") array");
  return to_spectral(g, std::vector<cplx>(a.data(), a.data() + a.size()));
}

CArray samples_of(const Field& f) {
  const auto s = to_real(f);
  const auto n = static_cast<py::ssize_t>(f.grid().n());
  CArray out({n, n});
  std::copy(s.begin(), s.end(), out.mutable_data());
  return out;
}

F32Array pairs_array(const std::vector<float>& v, int n) {
  F32Array out({static_cast<py::ssize_t>(n), static_cast<py::ssize_t>(n), py::ssize_t{2}});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Tensor tensor_from(const F32Array& a) {
  std::vector<std::uint32_t> dims;
  for (py::ssize_t i = 0; i < a.ndim(); ++i) dims.push_back(static_cast<std::uint32_t>(a.shape(i)));
  return Tensor(dims, std::vector<float>(a.data(), a.data() + a.size()));
}

F32Array array_from(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.dims.begin(), t.dims.end());
  F32Array out(shape);
  std::copy(t.data.begin(), t.data.end(), out.mutable_data());
  return out;
}

WeightArchive archive_from(const py::dict& tensors) {
  WeightArchive ar;
  for (const auto& [k, v] : tensors) ar.add(py::cast<std::string>(k), tensor_from(py::cast<F32Array>(v)));
  return ar;
}

py::dict dict_from(const WeightArchive& ar) {
  py::dict d;
  for (const auto& nt : ar.tensors()) d[py::str(nt.name)] = array_from(nt.tensor);
  return d;
}

py::dict trace_dict(const RunTrace& t) {
  py::dict d;
  d["state"] = samples_of(t.final_state->field());
  d["energy"] = t.final_energy;
  d["lambda"] = t.lambda;
  d["gnorm"] = t.final_gnorm;
  d["iterations"] = t.iterations;
  d["termination"] = to_string(t.termination);
  std::vector<double> e, g;
  for (const auto& r : t.records) {
    e.push_back(r.energy);
    g.push_back(r.gnorm);
  }
  d["energies"] = py::array(py::cast(e));
  d["gnorms"] = py::array(py::cast(g));
  py::list events;
  for (const auto& ev : t.events)
    events.append(py::dict(py::arg("k") = ev.k, py::arg("gnorm") = ev.gnorm, py::arg("indicator") = ev.indicator,
                           py::arg("decision") = to_string(ev.decision), py::arg("fallback") = ev.fallback));
  d["events"] = events;
  d["warnings"] = t.warnings;
  return d;
}

State initial_state(const GpeParams& p, std::uint64_t seed, const std::optional<CArray>& phi0) {
  validate(p);
  const Grid g = make_grid(p.a, p.n);
  return phi0 ? State::normalized(field_from(g, *phi0)) : random_state(g, seed);
}

py::dict dataset_dict(const std::vector<SamplePoint>& samples) {
  const auto count = static_cast<py::ssize_t>(samples.size());
  const int n = samples.empty() ? 0 : samples.front().params.n;
  const auto len = static_cast<std::size_t>(n) * n * 2;
  py::array_t<double> params({count, py::ssize_t{5}});
  py::array_t<double> tol(count);
  py::array_t<std::uint64_t> run_id(count);
  py::array_t<std::uint8_t> j(count);
  F32Array phi({count, py::ssize_t{n}, py::ssize_t{n}, py::ssize_t{2}});
  F32Array g({count, py::ssize_t{n}, py::ssize_t{n}, py::ssize_t{2}});
  F32Array star({count, py::ssize_t{n}, py::ssize_t{n}, py::ssize_t{2}});
  for (py::ssize_t i = 0; i < count; ++i) {
    const SamplePoint& s = samples[i];
    double* pr = params.mutable_data(i, 0);
    pr[0] = s.params.a;
    pr[1] = s.params.v1;
    pr[2] = s.params.v2;
    pr[3] = s.params.omega;
    pr[4] = s.params.kappa;
    tol.mutable_at(i) = s.tolerance;
    run_id.mutable_at(i) = s.run_id;
    j.mutable_at(i) = s.j;
    std::copy(s.phi.begin(), s.phi.end(), phi.mutable_data() + i * len);
    std::copy(s.g.begin(), s.g.end(), g.mutable_data() + i * len);
    std::copy(s.phi_star.begin(), s.phi_star.end(), star.mutable_data() + i * len);
  }
  py::dict d;
  d["n"] = n;
  d["params"] = params;
  d["tolerance"] = tol;
  d["run_id"] = run_id;
  d["j"] = j;
  d["phi"] = phi;
  d["g"] = g;
  d["phi_star"] = star;
  return d;
}

std::vector<SamplePoint> samples_from(const py::dict& d) {
  const auto params = py::cast<py::array_t<double, py::array::c_style | py::array::forcecast>>(d["params"]);
  const auto tol = py::cast<py::array_t<double, py::array::c_style | py::array::forcecast>>(d["tolerance"]);
  const auto run_id = py::cast<py::array_t<std::uint64_t, py::array::c_style | py::array::forcecast>>(d["run_id"]);
  const auto j = py::cast<py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>>(d["j"]);
  const auto phi = py::cast<F32Array>(d["phi"]);
  const auto g = py::cast<F32Array>(d["g"]);
  const auto star = py::cast<F32Array>(d["phi_star"]);
  if (phi.ndim() != 4 || phi.shape(3) != 2 || phi.shape(1) != phi.shape(2))
    throw DatasetError("phi must have shape (N, n, n, 2)");
  const py::ssize_t count = phi.shape(0);
  const int n = static_cast<int>(phi.shape(1));
  const auto len = static_cast<std::size_t>(n) * n * 2;
  for (const auto* a : {&g, &star})
    if (a->size() != phi.size()) throw DatasetError("g and phi_star must match phi in shape");
  if (params.ndim() != 2 || params.shape(0) != count || params.shape(1) != 5 || tol.size() != count ||
      run_id.size() != count || j.size() != count)
    throw DatasetError("params (N, 5), tolerance, run_id and j must have N = " + std::to_string(count) + " rows");
  std::vector<SamplePoint> out(count);
  for (py::ssize_t i = 0; i < count; ++i) {
    SamplePoint& s = out[i];
    const double* pr = params.data(i, 0);
    s.params = GpeParams{pr[0], n, pr[1], pr[2], pr[3], pr[4]};
    s.tolerance = tol.at(i);
    s.run_id = run_id.at(i);
    s.j = j.at(i);
    s.phi.assign(phi.data() + i * len, phi.data() + (i + 1) * len);
    s.g.assign(g.data() + i * len, g.data() + (i + 1) * len);
    s.phi_star.assign(star.data() + i * len, star.data() + (i + 1) * len);
  }
  return out;
}

NetworkSpec spec_from(const std::vector<int>& widths, int in_channels, int out_channels) {
  NetworkSpec s;
  s.widths = widths;
  s.in_channels = in_channels;
  s.out_channels = out_channels;
  return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Gross-Pitaevskii ground states with energy-adaptive Riemannian CG and U-Net acceleration.";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DatasetError>(m, "DatasetError", PyExc_ValueError);
  py::register_exception<ArchiveError>(m, "ArchiveError", PyExc_ValueError);

  py::class_<GpeParams>(m, "GpeParams")
      .def(py::init([](double a, int n, double v1, double v2, double omega, double kappa) {
             GpeParams p{a, n, v1, v2, omega, kappa};
             validate(p);
             return p;
           }),
           py::arg("a") = 20.0, py::arg("n") = 64, py::arg("v1") = 1.0, py::arg("v2") = 1.0, py::arg("omega") = 0.0,
           py::arg("kappa") = 0.0)
      .def_readwrite("a", &GpeParams::a)
      .def_readwrite("n", &GpeParams::n)
      .def_readwrite("v1", &GpeParams::v1)
      .def_readwrite("v2", &GpeParams::v2)
      .def_readwrite("omega", &GpeParams::omega)
      .def_readwrite("kappa", &GpeParams::kappa)
      .def("__repr__", [](const GpeParams& p) {
        return "GpeParams(a=" + std::to_string(p.a) + ", n=" + std::to_string(p.n) + ", v1=" + std::to_string(p.v1) +
               ", v2=" + std::to_string(p.v2) + ", omega=" + std::to_string(p.omega) +
               ", kappa=" + std::to_string(p.kappa) + ")";
      });

  m.def("grid_points", [](double a, int n) {
    const Grid g = make_grid(a, n);
    return std::vector<double>(g.xs().begin(), g.xs().end());
  }, py::arg("a"), py::arg("n"), "Sample coordinates x_i = -a/2 + i a/n.");

  m.def("random_state", [](const GpeParams& p, std::uint64_t seed) {
    validate(p);
    return samples_of(random_state(make_grid(p.a, p.n), seed).field());
  }, py::arg("params"), py::arg("seed"));

  m.def("energy", [](const GpeParams& p, const CArray& psi) {
    validate(p);
    return energy(field_from(make_grid(p.a, p.n), psi), p);
  }, py::arg("params"), py::arg("psi"), "Energy of real-space samples psi (not normalized).");

  m.def("solve", [](const GpeParams& p, std::uint64_t seed, double tol, int max_iters,
                    const std::optional<CArray>& phi0) {
    const State s = initial_state(p, seed, phi0);
    EarcgConfig cfg;
    cfg.tol = tol;
    cfg.max_iters = max_iters;
    RunTrace t;
    {
      py::gil_scoped_release nogil;
      t = earcg_solve(s, p, cfg);
    }
    return trace_dict(t);
  }, py::arg("params"), py::arg("seed") = 0, py::arg("tol") = 1e-8, py::arg("max_iters") = 30000,
     py::arg("phi0") = std::nullopt);

  m.def("accelerated_solve", [](const GpeParams& p, const std::filesystem::path& model,
                                const std::filesystem::path& spec, std::uint64_t seed, double eps2, double e0,
                                int n_e) {
    const State s = initial_state(p, seed, std::nullopt);
    AccelConfig cfg;
    cfg.eps2 = eps2;
    cfg.e0 = e0;
    cfg.n_e = n_e;
    const auto net = std::make_shared<const UNet>(read_spec_sidecar(spec), read_archive_file(model));
    const UNetPredictor predictor(net);
    RunTrace t;
    {
      py::gil_scoped_release nogil;
      t = accelerated_solve(s, p, cfg, {}, &predictor);
    }
    return trace_dict(t);
  }, py::arg("params"), py::arg("model"), py::arg("spec"), py::arg("seed") = 0, py::arg("eps2") = 1e-8,
     py::arg("e0") = 5e-3, py::arg("n_e") = 5);

  m.def("tolerance_schedule", &tolerance_schedule, py::arg("eps_min") = 1e-4, py::arg("eps_max") = 1e-1,
        py::arg("m") = 20);

  m.def("generate", [](const std::string& group, int runs, std::uint64_t seed, int n, double eps2, unsigned threads) {
    GenerateOptions opts;
    opts.eps2 = eps2;
    const auto jobs = plan_batch(parse_group(group), runs, seed, n);
    std::vector<RunOutcome> outcomes;
    {
      py::gil_scoped_release nogil;
      outcomes = generate_batch(jobs, opts, threads);
    }
    std::vector<SamplePoint> samples;
    for (auto& o : outcomes)
      for (auto& s : o.samples) samples.push_back(std::move(s));
    return py::make_tuple(dataset_dict(samples), batch_manifest(outcomes, opts));
  }, py::arg("group"), py::arg("runs"), py::arg("seed") = 0, py::arg("n") = 64, py::arg("eps2") = 1e-8,
     py::arg("threads") = 0, "Returns (dataset dict, manifest JSON).");

  m.def("read_dataset", [](const std::filesystem::path& path) { return dataset_dict(read_dataset(path)); },
        py::arg("path"));
  m.def("write_dataset", [](const std::filesystem::path& path, const py::dict& d) {
    write_dataset(samples_from(d), path);
  }, py::arg("path"), py::arg("data"));

  m.def("read_archive", [](const std::filesystem::path& path) { return dict_from(read_archive_file(path)); },
        py::arg("path"), "Tensors in archive order.");
  m.def("write_archive", [](const std::filesystem::path& path, const py::dict& tensors) {
    write_archive_file(archive_from(tensors), path);
  }, py::arg("path"), py::arg("tensors"));

  m.def("expected_tensors", [](const std::vector<int>& widths, int in_channels, int out_channels) {
    py::list out;
    for (const auto& [name, dims] : expected_tensors(spec_from(widths, in_channels, out_channels)))
      out.append(py::make_tuple(name, py::tuple(py::cast(dims))));
    return out;
  }, py::arg("widths") = std::vector<int>{64, 128, 256, 512, 1024}, py::arg("in_channels") = 4,
     py::arg("out_channels") = 2);
  m.def("parameter_count", [](const std::vector<int>& widths, int in_channels, int out_channels) {
    return parameter_count(spec_from(widths, in_channels, out_channels));
  }, py::arg("widths") = std::vector<int>{64, 128, 256, 512, 1024}, py::arg("in_channels") = 4,
     py::arg("out_channels") = 2);
  m.def("random_archive", [](const std::vector<int>& widths, std::uint64_t seed) {
    return dict_from(make_random_archive(spec_from(widths, 4, 2), seed));
  }, py::arg("widths"), py::arg("seed"));

  m.def("read_spec", [](const std::filesystem::path& path) {
    const NetworkSpec s = read_spec_sidecar(path);
    py::dict d;
    d["widths"] = s.widths;
    d["in_channels"] = s.in_channels;
    d["out_channels"] = s.out_channels;
    d["input_size"] = s.input_size;
    return d;
  }, py::arg("path"));
  m.def("write_spec", [](const std::filesystem::path& path, const std::vector<int>& widths, int input_size) {
    NetworkSpec s;
    s.widths = widths;
    s.input_size = input_size;
    write_spec_sidecar(s, path);
  }, py::arg("path"), py::arg("widths"), py::arg("input_size") = 0);

  m.def("forward", [](const py::dict& tensors, const std::vector<int>& widths, const F32Array& input) {
    const UNet net(spec_from(widths, 4, 2), archive_from(tensors));
    const Tensor in = tensor_from(input);
    Tensor out;
    {
      py::gil_scoped_release nogil;
      out = forward(net, in);
    }
    return array_from(out);
  }, py::arg("tensors"), py::arg("widths"), py::arg("input"), "(n, n, 4) float32 -> (n, n, 2) float32.");

  m.def("prepare_input", [](const CArray& phi, const CArray& g, double a) {
    const Grid grid = make_grid(a, static_cast<int>(phi.shape(0)));
    return array_from(prepare_input(field_from(grid, phi), field_from(grid, g)));
  }, py::arg("phi"), py::arg("g"), py::arg("a") = 20.0);

  m.def("read_state", [](const std::filesystem::path& path) { return samples_of(read_state(path)); },
        py::arg("path"));
  m.def("write_state", [](const std::filesystem::path& path, const CArray& psi, double a) {
    write_state(field_from(make_grid(a, static_cast<int>(psi.shape(0))), psi), path);
  }, py::arg("path"), py::arg("psi"), py::arg("a") = 20.0);
}
