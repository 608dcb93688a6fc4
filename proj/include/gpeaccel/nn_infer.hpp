// Forward-only U-Net executor and its weight archive.
//
// Topology (levels L = 1..depth, widths w_L):
//   enc1      : conv3x3(in -> w1) ReLU, conv3x3(w1 -> w1) ReLU
//   enc{L>1}  : maxpool2, conv3x3(w_{L-1} -> w_L) ReLU, conv3x3(w_L -> w_L) ReLU
//   up{L}     : transposed conv 2x2 stride 2 (w_{L+1} -> w_L), L = depth-1..1
//   dec{L}    : concat[skip enc{L}, up{L}] (2 w_L) -> conv3x3 ReLU -> conv3x3 ReLU (w_L)
//   out       : conv1x1(w1 -> out), no activation
// Same-size 3x3 convolutions use zero padding. Tensors are float32,
// channel-first internally; weights are [out, in, kh, kw].
//
// Archive layout (little-endian):
//   "GPUW" | u32 version (1) | u32 tensor count
//   per tensor: u32 name length | name bytes | u32 ndim (1..4) | u32 extents[ndim] | f32 data
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gpeaccel/field.hpp"

namespace gpeaccel {

class ArchiveError : public Error {
 public:
  using Error::Error;
};

/// Float tensor with up to 4 extents, row-major.
struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  Tensor() = default;
  Tensor(std::vector<std::uint32_t> d, std::vector<float> v);
  explicit Tensor(std::vector<std::uint32_t> d);
  std::size_t numel() const;
  bool operator==(const Tensor&) const = default;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
  bool operator==(const NamedTensor&) const = default;
};

class WeightArchive {
 public:
  WeightArchive() = default;
  explicit WeightArchive(std::vector<NamedTensor> tensors);

  const std::vector<NamedTensor>& tensors() const { return tensors_; }
  /// Appends; throws on duplicate names.
  void add(std::string name, Tensor t);
  const Tensor* find(const std::string& name) const;
  const Tensor& at(const std::string& name) const;
  bool operator==(const WeightArchive& o) const { return tensors_ == o.tensors_; }

 private:
  std::vector<NamedTensor> tensors_;
  std::map<std::string, std::size_t> index_;
};

inline constexpr std::uint32_t kArchiveVersion = 1;

WeightArchive load_archive(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_archive(const WeightArchive& archive);
WeightArchive read_archive_file(const std::filesystem::path& path);
void write_archive_file(const WeightArchive& archive, const std::filesystem::path& path);

struct NetworkSpec {
  std::vector<int> widths{64, 128, 256, 512, 1024};
  int in_channels = 4;
  int out_channels = 2;
  /// Spatial size used in training (0 = unspecified); informational.
  int input_size = 0;

  int depth() const { return static_cast<int>(widths.size()); }
  /// Required divisor of the spatial size: 2^(depth - 1).
  int size_divisor() const { return 1 << (depth() - 1); }
};

/// (name, dims) for every parameter tensor, in archive order.
std::vector<std::pair<std::string, std::vector<std::uint32_t>>> expected_tensors(const NetworkSpec& spec);
std::size_t parameter_count(const NetworkSpec& spec);

/// Throws ArchiveError naming the first missing or mis-shaped tensor.
void validate_archive(const NetworkSpec& spec, const WeightArchive& archive);

WeightArchive make_zero_archive(const NetworkSpec& spec);
/// He-normal weights, small random biases; deterministic in seed.
WeightArchive make_random_archive(const NetworkSpec& spec, std::uint64_t seed);

/// JSON sidecar: {"widths": [...], "in_channels", "out_channels", "input_size", ...}.
NetworkSpec read_spec_sidecar(const std::filesystem::path& path);
void write_spec_sidecar(const NetworkSpec& spec, const std::filesystem::path& path);

/// Channel-first activation (C, H, W).
struct Activation {
  int c = 0, h = 0, w = 0;
  std::vector<float> data;
  Activation() = default;
  Activation(int c_, int h_, int w_) : c(c_), h(h_), w(w_), data(static_cast<std::size_t>(c_) * h_ * w_) {}
  float& at(int ch, int y, int x) { return data[(static_cast<std::size_t>(ch) * h + y) * w + x]; }
  float at(int ch, int y, int x) const { return data[(static_cast<std::size_t>(ch) * h + y) * w + x]; }
};

namespace layers {
Activation conv3x3_same(const Activation& in, const Tensor& weight, const Tensor& bias);
Activation conv1x1(const Activation& in, const Tensor& weight, const Tensor& bias);
Activation upconv2x2(const Activation& in, const Tensor& weight, const Tensor& bias);
Activation maxpool2x2(const Activation& in);
Activation concat(const Activation& a, const Activation& b);
void relu_inplace(Activation& a);
}  // namespace layers

/// Bound, validated model. Immutable; forward is reentrant.
class UNet {
 public:
  UNet(NetworkSpec spec, WeightArchive archive);
  const NetworkSpec& spec() const { return spec_; }
  const WeightArchive& archive() const { return archive_; }
  Activation forward(const Activation& input) const;

 private:
  NetworkSpec spec_;
  WeightArchive archive_;
};

/// Input tensor (n, n, 4) channel-last, float32: [Re phi, Im phi, Re g, Im g]
/// in real space, unnormalized.
Tensor prepare_input(const State& phi, const TangentField& g);
Tensor prepare_input(const Field& phi, const Field& g);

/// (n, n, C) channel-last <-> (C, n, n) channel-first.
Activation to_channel_first(const Tensor& t);
Tensor to_channel_last(const Activation& a);

/// (n, n, 4) -> (n, n, 2). Throws on shape or spatial-divisibility mismatch.
Tensor forward(const UNet& model, const Tensor& input);
Tensor forward(const NetworkSpec& spec, const WeightArchive& archive, const Tensor& input);

/// (n, n, 2) real/imag channels -> spectral field, NOT normalized.
Field postprocess(const Tensor& output, const Grid& grid);

}  // namespace gpeaccel
