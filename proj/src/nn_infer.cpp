#include "gpeaccel/nn_infer.hpp"

#include <Eigen/Core>
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "binary_io.hpp"

namespace gpeaccel {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

std::string dims_str(const std::vector<std::uint32_t>& d) {
  std::string s = "[";
  for (std::size_t i = 0; i < d.size(); ++i) s += (i ? "," : "") + std::to_string(d[i]);
  return s + "]";
}

void add_bias(Activation& out, const Tensor& bias) {
  const std::size_t hw = static_cast<std::size_t>(out.h) * out.w;
  for (int o = 0; o < out.c; ++o) {
    float* p = out.data.data() + o * hw;
    const float b = bias.data[o];
    for (std::size_t i = 0; i < hw; ++i) p[i] += b;
  }
}

void check_weight(const Tensor& w, int out, int in, int k, const Tensor& bias) {
  const std::vector<std::uint32_t> want{static_cast<std::uint32_t>(out), static_cast<std::uint32_t>(in),
                                        static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k)};
  if (w.dims != want) throw ShapeError("weight dims " + dims_str(w.dims) + " expected " + dims_str(want));
  if (bias.dims != std::vector<std::uint32_t>{static_cast<std::uint32_t>(out)})
    throw ShapeError("bias dims " + dims_str(bias.dims) + " expected [" + std::to_string(out) + "]");
}

}  // namespace

Tensor::Tensor(std::vector<std::uint32_t> d, std::vector<float> v) : dims(std::move(d)), data(std::move(v)) {
  if (dims.empty() || dims.size() > 4) throw ArchiveError("tensor must have 1..4 extents");
  if (data.size() != numel()) throw ArchiveError("tensor data size does not match dims " + dims_str(dims));
}

Tensor::Tensor(std::vector<std::uint32_t> d) : dims(std::move(d)) { data.assign(numel(), 0.0f); }

std::size_t Tensor::numel() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

WeightArchive::WeightArchive(std::vector<NamedTensor> tensors) {
  for (auto& t : tensors) add(std::move(t.name), std::move(t.tensor));
}

void WeightArchive::add(std::string name, Tensor t) {
  if (index_.count(name)) throw ArchiveError("duplicate tensor name '" + name + "'");
  index_.emplace(name, tensors_.size());
  tensors_.push_back({std::move(name), std::move(t)});
}

const Tensor* WeightArchive::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &tensors_[it->second].tensor;
}

const Tensor& WeightArchive::at(const std::string& name) const {
  const Tensor* t = find(name);
  if (!t) throw ArchiveError("missing tensor '" + name + "'");
  return *t;
}

WeightArchive load_archive(std::span<const std::uint8_t> bytes) {
  io::Reader<ArchiveError> r(bytes);
  if (bytes.size() < 12) r.fail("archive header too short (" + std::to_string(bytes.size()) + " bytes)");
  if (r.str(4, "magic") != "GPUW") throw ArchiveError("bad archive magic at byte offset 0");
  const auto version = r.u32("version");
  if (version != kArchiveVersion) throw ArchiveError("unsupported archive version " + std::to_string(version));
  const auto count = r.u32("tensor count");
  WeightArchive ar;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.u32("name length");
    std::string name = r.str(len, "tensor name");
    const auto ndim = r.u32("ndim");
    if (ndim < 1 || ndim > 4) r.fail("tensor '" + name + "' has invalid ndim " + std::to_string(ndim));
    std::vector<std::uint32_t> dims(ndim);
    for (auto& d : dims) d = r.u32("extent");
    Tensor t(dims);
    r.f32s(t.data, "tensor data");
    ar.add(std::move(name), std::move(t));
  }
  if (r.remaining() != 0) r.fail("trailing bytes after last tensor");
  return ar;
}

std::vector<std::uint8_t> write_archive(const WeightArchive& archive) {
  io::Writer w;
  w.bytes("GPUW", 4);
  w.u32(kArchiveVersion);
  w.u32(static_cast<std::uint32_t>(archive.tensors().size()));
  for (const auto& nt : archive.tensors()) {
    w.u32(static_cast<std::uint32_t>(nt.name.size()));
    w.bytes(nt.name.data(), nt.name.size());
    w.u32(static_cast<std::uint32_t>(nt.tensor.dims.size()));
    for (auto d : nt.tensor.dims) w.u32(d);
    w.f32s(nt.tensor.data);
  }
  return std::move(w.buffer());
}

WeightArchive read_archive_file(const std::filesystem::path& path) { return load_archive(io::read_file(path)); }

void write_archive_file(const WeightArchive& archive, const std::filesystem::path& path) {
  io::write_file(path, write_archive(archive));
}

std::vector<std::pair<std::string, std::vector<std::uint32_t>>> expected_tensors(const NetworkSpec& spec) {
  if (spec.widths.empty()) throw ArchiveError("network needs at least one level");
  std::vector<std::pair<std::string, std::vector<std::uint32_t>>> out;
  auto u = [](int v) { return static_cast<std::uint32_t>(v); };
  auto conv = [&](const std::string& prefix, int in, int o, int k) {
    out.push_back({prefix + ".weight", {u(o), u(in), u(k), u(k)}});
    out.push_back({prefix + ".bias", {u(o)}});
  };
  const int depth = spec.depth();
  for (int l = 1; l <= depth; ++l) {
    const int w = spec.widths[l - 1];
    const int in = l == 1 ? spec.in_channels : spec.widths[l - 2];
    conv("enc" + std::to_string(l) + ".conv1", in, w, 3);
    conv("enc" + std::to_string(l) + ".conv2", w, w, 3);
  }
  for (int l = depth - 1; l >= 1; --l) {
    const int w = spec.widths[l - 1];
    conv("up" + std::to_string(l), spec.widths[l], w, 2);
    conv("dec" + std::to_string(l) + ".conv1", 2 * w, w, 3);
    conv("dec" + std::to_string(l) + ".conv2", w, w, 3);
  }
  conv("out", spec.widths[0], spec.out_channels, 1);
  return out;
}

std::size_t parameter_count(const NetworkSpec& spec) {
  std::size_t n = 0;
  for (const auto& [name, dims] : expected_tensors(spec)) {
    std::size_t m = 1;
    for (auto d : dims) m *= d;
    n += m;
  }
  return n;
}

void validate_archive(const NetworkSpec& spec, const WeightArchive& archive) {
  const auto want = expected_tensors(spec);
  for (const auto& [name, dims] : want) {
    const Tensor* t = archive.find(name);
    if (!t) throw ArchiveError("archive is missing tensor '" + name + "'");
    if (t->dims != dims)
      throw ArchiveError("tensor '" + name + "' has dims " + dims_str(t->dims) + ", expected " + dims_str(dims));
  }
  if (archive.tensors().size() != want.size())
    throw ArchiveError("archive has " + std::to_string(archive.tensors().size()) + " tensors, network expects " +
                       std::to_string(want.size()));
}

WeightArchive make_zero_archive(const NetworkSpec& spec) {
  WeightArchive ar;
  for (auto& [name, dims] : expected_tensors(spec)) ar.add(name, Tensor(dims));
  return ar;
}

WeightArchive make_random_archive(const NetworkSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  WeightArchive ar;
  for (auto& [name, dims] : expected_tensors(spec)) {
    Tensor t(dims);
    if (dims.size() == 4) {
      const double fan_in = static_cast<double>(dims[1]) * dims[2] * dims[3];
      std::normal_distribution<float> dist(0.0f, static_cast<float>(std::sqrt(2.0 / fan_in)));
      for (auto& v : t.data) v = dist(rng);
    } else {
      std::uniform_real_distribution<float> dist(-0.05f, 0.05f);
      for (auto& v : t.data) v = dist(rng);
    }
    ar.add(name, std::move(t));
  }
  return ar;
}

NetworkSpec read_spec_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArchiveError("cannot open spec sidecar " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ArchiveError("malformed spec sidecar: " + std::string(e.what()));
  }
  NetworkSpec spec;
  try {
    spec.widths = j.at("widths").get<std::vector<int>>();
    spec.in_channels = j.value("in_channels", 4);
    spec.out_channels = j.value("out_channels", 2);
    spec.input_size = j.value("input_size", 0);
  } catch (const nlohmann::json::exception& e) {
    throw ArchiveError("invalid spec sidecar: " + std::string(e.what()));
  }
  if (spec.widths.empty()) throw ArchiveError("spec sidecar has no widths");
  for (int w : spec.widths)
    if (w <= 0) throw ArchiveError("spec sidecar has nonpositive width");
  if (spec.in_channels != 4 || spec.out_channels != 2)
    throw ArchiveError("spec sidecar must declare 4 input and 2 output channels");
  if (spec.input_size != 0 && spec.input_size % spec.size_divisor() != 0)
    throw ArchiveError("spec sidecar input_size not divisible by " + std::to_string(spec.size_divisor()));
  return spec;
}

void write_spec_sidecar(const NetworkSpec& spec, const std::filesystem::path& path) {
  nlohmann::json j{{"widths", spec.widths},
                   {"in_channels", spec.in_channels},
                   {"out_channels", spec.out_channels},
                   {"input_size", spec.input_size}};
  std::ofstream out(path);
  if (!out) throw ArchiveError("cannot write spec sidecar " + path.string());
  out << j.dump(2) << "\n";
}

namespace layers {

Activation conv3x3_same(const Activation& in, const Tensor& weight, const Tensor& bias) {
  const int out_c = static_cast<int>(bias.numel());
  check_weight(weight, out_c, in.c, 3, bias);
  const int h = in.h, w = in.w;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  RowMat cols(static_cast<Eigen::Index>(in.c) * 9, static_cast<Eigen::Index>(hw));
  for (int c = 0; c < in.c; ++c)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        float* row = cols.data() + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          for (int x = 0; x < w; ++x) {
            const int sx = x + kx - 1;
            row[static_cast<std::size_t>(y) * w + x] =
                (sy >= 0 && sy < h && sx >= 0 && sx < w) ? in.at(c, sy, sx) : 0.0f;
          }
        }
      }
  Activation out(out_c, h, w);
  ConstMap wm(weight.data.data(), out_c, static_cast<Eigen::Index>(in.c) * 9);
  Map om(out.data.data(), out_c, static_cast<Eigen::Index>(hw));
  om.noalias() = wm * cols;
  add_bias(out, bias);
  return out;
}

Activation conv1x1(const Activation& in, const Tensor& weight, const Tensor& bias) {
  const int out_c = static_cast<int>(bias.numel());
  check_weight(weight, out_c, in.c, 1, bias);
  const std::size_t hw = static_cast<std::size_t>(in.h) * in.w;
  Activation out(out_c, in.h, in.w);
  ConstMap wm(weight.data.data(), out_c, in.c);
  ConstMap im(in.data.data(), in.c, static_cast<Eigen::Index>(hw));
  Map om(out.data.data(), out_c, static_cast<Eigen::Index>(hw));
  om.noalias() = wm * im;
  add_bias(out, bias);
  return out;
}

Activation upconv2x2(const Activation& in, const Tensor& weight, const Tensor& bias) {
  const int out_c = static_cast<int>(bias.numel());
  check_weight(weight, out_c, in.c, 2, bias);
  const std::size_t hw = static_cast<std::size_t>(in.h) * in.w;
  Activation out(out_c, 2 * in.h, 2 * in.w);
  ConstMap im(in.data.data(), in.c, static_cast<Eigen::Index>(hw));
  RowMat wd(out_c, in.c);
  RowMat part(out_c, static_cast<Eigen::Index>(hw));
  for (int dy = 0; dy < 2; ++dy)
    for (int dx = 0; dx < 2; ++dx) {
      for (int o = 0; o < out_c; ++o)
        for (int c = 0; c < in.c; ++c)
          wd(o, c) = weight.data[((static_cast<std::size_t>(o) * in.c + c) * 2 + dy) * 2 + dx];
      part.noalias() = wd * im;
      for (int o = 0; o < out_c; ++o)
        for (int y = 0; y < in.h; ++y)
          for (int x = 0; x < in.w; ++x) out.at(o, 2 * y + dy, 2 * x + dx) = part(o, y * in.w + x);
    }
  add_bias(out, bias);
  return out;
}

Activation maxpool2x2(const Activation& in) {
  if (in.h % 2 || in.w % 2) throw ShapeError("max-pool needs even spatial size");
  Activation out(in.c, in.h / 2, in.w / 2);
  for (int c = 0; c < in.c; ++c)
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x)
        out.at(c, y, x) = std::max({in.at(c, 2 * y, 2 * x), in.at(c, 2 * y, 2 * x + 1), in.at(c, 2 * y + 1, 2 * x),
                                    in.at(c, 2 * y + 1, 2 * x + 1)});
  return out;
}

Activation concat(const Activation& a, const Activation& b) {
  if (a.h != b.h || a.w != b.w) throw ShapeError("concat spatial mismatch");
  Activation out(a.c + b.c, a.h, a.w);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
  return out;
}

void relu_inplace(Activation& a) {
  for (auto& v : a.data) v = std::max(v, 0.0f);
}

}  // namespace layers

UNet::UNet(NetworkSpec spec, WeightArchive archive) : spec_(std::move(spec)), archive_(std::move(archive)) {
  validate_archive(spec_, archive_);
}

Activation UNet::forward(const Activation& input) const {
  if (input.c != spec_.in_channels)
    throw ShapeError("input has " + std::to_string(input.c) + " channels, network expects " +
                     std::to_string(spec_.in_channels));
  const int div = spec_.size_divisor();
  if (input.h % div || input.w % div)
    throw ShapeError("input spatial size must be divisible by " + std::to_string(div));

  auto block = [&](Activation x, const std::string& prefix) {
    x = layers::conv3x3_same(x, archive_.at(prefix + ".conv1.weight"), archive_.at(prefix + ".conv1.bias"));
    layers::relu_inplace(x);
    x = layers::conv3x3_same(x, archive_.at(prefix + ".conv2.weight"), archive_.at(prefix + ".conv2.bias"));
    layers::relu_inplace(x);
    return x;
  };

  const int depth = spec_.depth();
  std::vector<Activation> skips;
  Activation x = input;
  for (int l = 1; l <= depth; ++l) {
    if (l > 1) x = layers::maxpool2x2(x);
    x = block(std::move(x), "enc" + std::to_string(l));
    if (l < depth) skips.push_back(x);
  }
  for (int l = depth - 1; l >= 1; --l) {
    const std::string up = "up" + std::to_string(l);
    x = layers::upconv2x2(x, archive_.at(up + ".weight"), archive_.at(up + ".bias"));
    x = layers::concat(skips[l - 1], x);
    x = block(std::move(x), "dec" + std::to_string(l));
  }
  return layers::conv1x1(x, archive_.at("out.weight"), archive_.at("out.bias"));
}

Tensor prepare_input(const Field& phi, const Field& g) {
  require_same_grid(phi, g);
  const int n = phi.grid().n();
  const auto p = to_real(phi);
  const auto q = to_real(g);
  Tensor t({static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(n), 4u});
  for (std::size_t i = 0; i < p.size(); ++i) {
    t.data[4 * i + 0] = static_cast<float>(p[i].real());
    t.data[4 * i + 1] = static_cast<float>(p[i].imag());
    t.data[4 * i + 2] = static_cast<float>(q[i].real());
    t.data[4 * i + 3] = static_cast<float>(q[i].imag());
  }
  return t;
}

Tensor prepare_input(const State& phi, const TangentField& g) { return prepare_input(phi.field(), g.field()); }

Activation to_channel_first(const Tensor& t) {
  if (t.dims.size() != 3) throw ShapeError("expected an (h, w, c) tensor");
  const int h = static_cast<int>(t.dims[0]), w = static_cast<int>(t.dims[1]), c = static_cast<int>(t.dims[2]);
  Activation a(c, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) a.at(ch, y, x) = t.data[(static_cast<std::size_t>(y) * w + x) * c + ch];
  return a;
}

Tensor to_channel_last(const Activation& a) {
  Tensor t({static_cast<std::uint32_t>(a.h), static_cast<std::uint32_t>(a.w), static_cast<std::uint32_t>(a.c)});
  for (int y = 0; y < a.h; ++y)
    for (int x = 0; x < a.w; ++x)
      for (int ch = 0; ch < a.c; ++ch) t.data[(static_cast<std::size_t>(y) * a.w + x) * a.c + ch] = a.at(ch, y, x);
  return t;
}

Tensor forward(const UNet& model, const Tensor& input) {
  if (input.dims.size() != 3 || input.dims[2] != static_cast<std::uint32_t>(model.spec().in_channels))
    throw ShapeError("forward expects an (n, n, " + std::to_string(model.spec().in_channels) + ") tensor, got " +
                     dims_str(input.dims));
  return to_channel_last(model.forward(to_channel_first(input)));
}

Tensor forward(const NetworkSpec& spec, const WeightArchive& archive, const Tensor& input) {
  return forward(UNet(spec, archive), input);
}

Field postprocess(const Tensor& output, const Grid& grid) {
  const auto n = static_cast<std::uint32_t>(grid.n());
  if (output.dims != std::vector<std::uint32_t>{n, n, 2u})
    throw ShapeError("postprocess expects (n, n, 2), got " + dims_str(output.dims));
  std::vector<cplx> samples(grid.size());
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = cplx(output.data[2 * i], output.data[2 * i + 1]);
  return to_spectral(grid, std::move(samples));
}

}  // namespace gpeaccel
