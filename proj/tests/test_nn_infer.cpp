#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "gpeaccel/nn_infer.hpp"
#include "support.hpp"

using namespace gpeaccel;

namespace {

Tensor kernel3(std::initializer_list<float> v) { return Tensor({1, 1, 3, 3}, std::vector<float>(v)); }
Tensor scalar_bias(float b) { return Tensor({1}, {b}); }

Activation ramp4() {
  Activation a(1, 4, 4);
  for (int i = 0; i < 16; ++i) a.data[i] = static_cast<float>(i + 1);
  return a;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("gpeaccel_test_" + name);
}

NetworkSpec small_spec() {
  NetworkSpec s;
  s.widths = {4, 8, 8, 16, 16};
  return s;
}

}  // namespace

TEST_CASE("default topology") {
  const NetworkSpec spec;
  const auto t = expected_tensors(spec);
  CHECK(t.size() == 46);
  // Independent closed form of the parameter count.
  const int w[5] = {64, 128, 256, 512, 1024};
  std::size_t want = 0;
  for (int l = 0; l < 5; ++l) {
    const std::size_t in = l == 0 ? 4 : w[l - 1];
    want += in * w[l] * 9 + w[l] + static_cast<std::size_t>(w[l]) * w[l] * 9 + w[l];
  }
  for (int l = 0; l < 4; ++l)
    want += static_cast<std::size_t>(w[l + 1]) * w[l] * 4 + w[l] + 2ull * w[l] * w[l] * 9 + w[l] +
            static_cast<std::size_t>(w[l]) * w[l] * 9 + w[l];
  want += 64 * 2 + 2;
  CHECK(parameter_count(spec) == want);
  CHECK(want == 31032386);
  CHECK(std::abs(static_cast<double>(want) / 3.1e7 - 1.0) < 0.05);
  CHECK(spec.size_divisor() == 16);
  CHECK(t.front().first == "enc1.conv1.weight");
  CHECK(t.back().first == "out.bias");
}

TEST_CASE("3x3 convolution hand values") {
  const Activation in = ramp4();
  const Activation id = layers::conv3x3_same(in, kernel3({0, 0, 0, 0, 1, 0, 0, 0, 0}), scalar_bias(0));
  CHECK(id.data == in.data);

  const Activation box = layers::conv3x3_same(in, kernel3({1, 1, 1, 1, 1, 1, 1, 1, 1}), scalar_bias(0));
  const float want[16] = {14, 24, 30, 22, 33, 54, 63, 45, 57, 90, 99, 69, 46, 72, 78, 54};
  for (int i = 0; i < 16; ++i) CHECK(box.data[i] == want[i]);

  // Cross-correlation orientation: the top-left tap reads the up-left neighbour.
  const Activation shift = layers::conv3x3_same(in, kernel3({1, 0, 0, 0, 0, 0, 0, 0, 0}), scalar_bias(0.5f));
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      const float src = (y > 0 && x > 0) ? in.at(0, y - 1, x - 1) : 0.0f;
      CHECK(shift.at(0, y, x) == src + 0.5f);
    }
}

TEST_CASE("multi-channel convolution sums over inputs") {
  Activation in(2, 4, 4);
  for (int i = 0; i < 16; ++i) {
    in.data[i] = static_cast<float>(i + 1);
    in.data[16 + i] = 100.0f;
  }
  // out0 = in0 (centre tap), out1 = 2 * in1 centre tap - 1.
  Tensor w({2, 2, 3, 3});
  w.data[0 * 18 + 0 * 9 + 4] = 1.0f;
  w.data[1 * 18 + 1 * 9 + 4] = 2.0f;
  const Activation out = layers::conv3x3_same(in, w, Tensor({2}, {0.0f, -1.0f}));
  for (int i = 0; i < 16; ++i) {
    CHECK(out.data[i] == static_cast<float>(i + 1));
    CHECK(out.data[16 + i] == 199.0f);
  }
  CHECK_THROWS_AS(layers::conv3x3_same(in, kernel3({0, 0, 0, 0, 1, 0, 0, 0, 0}), scalar_bias(0)), ShapeError);
}

TEST_CASE("pooling, transposed convolution, concatenation") {
  const Activation in = ramp4();
  const Activation pooled = layers::maxpool2x2(in);
  CHECK(pooled.h == 2);
  CHECK(pooled.data == std::vector<float>{6, 8, 14, 16});

  Activation small(1, 2, 2);
  small.data = {1, 2, 3, 4};
  const Activation up = layers::upconv2x2(small, Tensor({1, 1, 2, 2}, {1, 10, 100, 1000}), scalar_bias(0.5f));
  const float want[16] = {1.5f,   10.5f,   2.5f,   20.5f,   100.5f, 1000.5f, 200.5f, 2000.5f,
                          3.5f,   30.5f,   4.5f,   40.5f,   300.5f, 3000.5f, 400.5f, 4000.5f};
  REQUIRE(up.h == 4);
  for (int i = 0; i < 16; ++i) CHECK(up.data[i] == want[i]);

  const Activation cat = layers::concat(in, up);
  CHECK(cat.c == 2);
  CHECK(std::equal(in.data.begin(), in.data.end(), cat.data.begin()));
  CHECK(std::equal(up.data.begin(), up.data.end(), cat.data.begin() + 16));

  Activation neg(1, 1, 3);
  neg.data = {-1.0f, 0.0f, 2.0f};
  layers::relu_inplace(neg);
  CHECK(neg.data == std::vector<float>{0.0f, 0.0f, 2.0f});

  const Activation one = layers::conv1x1(in, Tensor({2, 1, 1, 1}, {2.0f, -1.0f}), Tensor({2}, {1.0f, 0.0f}));
  for (int i = 0; i < 16; ++i) {
    CHECK(one.data[i] == 2.0f * in.data[i] + 1.0f);
    CHECK(one.data[16 + i] == -in.data[i]);
  }
}

TEST_CASE("one-level miniature network") {
  NetworkSpec spec;
  spec.widths = {1};
  spec.in_channels = 1;
  spec.out_channels = 1;
  WeightArchive ar;
  ar.add("enc1.conv1.weight", kernel3({1, 1, 1, 1, 1, 1, 1, 1, 1}));
  ar.add("enc1.conv1.bias", scalar_bias(0));
  ar.add("enc1.conv2.weight", kernel3({0, 0, 0, 0, 1, 0, 0, 0, 0}));
  ar.add("enc1.conv2.bias", scalar_bias(0));
  ar.add("out.weight", Tensor({1, 1, 1, 1}, {1.0f}));
  ar.add("out.bias", scalar_bias(0));
  const UNet net(spec, ar);
  const Activation out = net.forward(ramp4());
  const float want[16] = {14, 24, 30, 22, 33, 54, 63, 45, 57, 90, 99, 69, 46, 72, 78, 54};
  for (int i = 0; i < 16; ++i) CHECK(out.data[i] == want[i]);
}

TEST_CASE("two-level miniature: skip comes first in the concatenation") {
  NetworkSpec spec;
  spec.widths = {1, 1};
  spec.in_channels = 1;
  spec.out_channels = 1;
  const Tensor id = kernel3({0, 0, 0, 0, 1, 0, 0, 0, 0});
  auto build = [&](int pick) {
    WeightArchive ar;
    ar.add("enc1.conv1.weight", id);
    ar.add("enc1.conv1.bias", scalar_bias(0));
    ar.add("enc1.conv2.weight", id);
    ar.add("enc1.conv2.bias", scalar_bias(0));
    ar.add("enc2.conv1.weight", id);
    ar.add("enc2.conv1.bias", scalar_bias(0));
    ar.add("enc2.conv2.weight", id);
    ar.add("enc2.conv2.bias", scalar_bias(0));
    ar.add("up1.weight", Tensor({1, 1, 2, 2}, {1, 1, 1, 1}));
    ar.add("up1.bias", scalar_bias(0));
    Tensor sel({1, 2, 3, 3});
    sel.data[pick * 9 + 4] = 1.0f;
    ar.add("dec1.conv1.weight", sel);
    ar.add("dec1.conv1.bias", scalar_bias(0));
    ar.add("dec1.conv2.weight", id);
    ar.add("dec1.conv2.bias", scalar_bias(0));
    ar.add("out.weight", Tensor({1, 1, 1, 1}, {1.0f}));
    ar.add("out.bias", scalar_bias(0));
    return UNet(spec, ar);
  };
  const Activation in = ramp4();
  CHECK(build(0).forward(in).data == in.data);
  const std::vector<float> upsampled = {6, 6, 8, 8, 6, 6, 8, 8, 14, 14, 16, 16, 14, 14, 16, 16};
  CHECK(build(1).forward(in).data == upsampled);
  CHECK_THROWS_AS(build(0).forward(Activation(1, 3, 4)), ShapeError);
  CHECK_THROWS_AS(build(0).forward(Activation(2, 4, 4)), ShapeError);
}

TEST_CASE("zero archive gives zero output; random archive is deterministic and fully convolutional") {
  const NetworkSpec spec = small_spec();
  const Grid g32 = make_grid(20.0, 32);
  const State phi = random_state(g32, 1);
  const TangentField gr = TangentField::project(std::make_shared<const State>(phi), random_state(g32, 2).field());
  const Tensor in32 = prepare_input(phi, gr);

  const Tensor z = forward(spec, make_zero_archive(spec), in32);
  CHECK(z.dims == std::vector<std::uint32_t>{32, 32, 2});
  for (float v : z.data) CHECK(v == 0.0f);

  const UNet net(spec, make_random_archive(spec, 7));
  const Tensor a = forward(net, in32), b = forward(net, in32);
  CHECK(a.data == b.data);
  CHECK(a.dims == std::vector<std::uint32_t>{32, 32, 2});
  bool nonzero = false;
  for (float v : a.data) nonzero |= v != 0.0f;
  CHECK(nonzero);

  const Grid g64 = make_grid(20.0, 64);
  const Tensor in64 = prepare_input(random_state(g64, 3).field(), random_state(g64, 4).field());
  CHECK(forward(net, in64).dims == std::vector<std::uint32_t>{64, 64, 2});
  CHECK(make_random_archive(spec, 7) == make_random_archive(spec, 7));
  CHECK_FALSE(make_random_archive(spec, 7) == make_random_archive(spec, 8));
}

TEST_CASE("archive round trip and corrupted inputs") {
  const NetworkSpec spec = small_spec();
  const WeightArchive ar = make_random_archive(spec, 3);
  const auto bytes = write_archive(ar);
  CHECK(load_archive(bytes) == ar);
  CHECK(write_archive(load_archive(bytes)) == bytes);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "GPUW");

  const auto path = temp_path("archive.gpuw");
  write_archive_file(ar, path);
  CHECK(read_archive_file(path) == ar);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(load_archive({}), ArchiveError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_WITH_AS(load_archive(bad_magic), doctest::Contains("magic"), ArchiveError);
  auto bad_version = bytes;
  bad_version[4] = 9;
  CHECK_THROWS_WITH_AS(load_archive(bad_version), doctest::Contains("version"), ArchiveError);
  const std::vector<std::uint8_t> truncated(bytes.begin(), bytes.end() - 3);
  CHECK_THROWS_WITH_AS(load_archive(truncated), doctest::Contains("byte offset"), ArchiveError);
  auto extra = bytes;
  extra.push_back(0);
  CHECK_THROWS_AS(load_archive(extra), ArchiveError);

  WeightArchive wrong;
  for (const auto& nt : ar.tensors()) {
    Tensor t = nt.tensor;
    if (nt.name == "dec2.conv1.weight") {
      t.dims[1] += 1;
      t.data.resize(t.numel());
    }
    wrong.add(nt.name, t);
  }
  CHECK_THROWS_WITH_AS(validate_archive(spec, wrong), doctest::Contains("dec2.conv1.weight"), ArchiveError);
  CHECK_THROWS_WITH_AS(UNet(spec, WeightArchive{}), doctest::Contains("enc1.conv1.weight"), ArchiveError);
  WeightArchive dup;
  dup.add("x", Tensor({1}, {1.0f}));
  CHECK_THROWS_AS(dup.add("x", Tensor({1}, {1.0f})), ArchiveError);
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0f}), ArchiveError);
}

TEST_CASE("spec sidecar") {
  NetworkSpec spec = small_spec();
  spec.input_size = 64;
  const auto path = temp_path("spec.json");
  write_spec_sidecar(spec, path);
  const NetworkSpec back = read_spec_sidecar(path);
  CHECK(back.widths == spec.widths);
  CHECK(back.input_size == 64);
  {
    std::ofstream out(path);
    out << R"({"widths": [8, 16], "in_channels": 3, "out_channels": 2})";
  }
  CHECK_THROWS_AS(read_spec_sidecar(path), ArchiveError);
  {
    std::ofstream out(path);
    out << "{not json";
  }
  CHECK_THROWS_AS(read_spec_sidecar(path), ArchiveError);
  std::filesystem::remove(path);
}

TEST_CASE("prepare_input and postprocess") {
  const Grid g = make_grid(20.0, 32);
  // Real-valued phi in real space.
  const Field real = testing_support::sampled(g, [](double x1, double x2) {
    return cplx(std::exp(-(x1 * x1 + 2 * x2 * x2) / 4.0), 0.0);
  });
  const Field grad = testing_support::sampled(g, [](double x1, double x2) { return cplx(x1, -x2); });
  const Tensor t = prepare_input(real, grad);
  REQUIRE(t.dims == std::vector<std::uint32_t>{32, 32, 4});
  const auto rs = to_real(real);
  const auto gs = to_real(grad);
  for (std::size_t i = 0; i < rs.size(); ++i) {
    CHECK(t.data[4 * i + 0] == static_cast<float>(rs[i].real()));
    CHECK(t.data[4 * i + 1] == static_cast<float>(rs[i].imag()));
    CHECK(std::abs(t.data[4 * i + 1]) < 1e-7f);
    CHECK(t.data[4 * i + 2] == static_cast<float>(gs[i].real()));
    CHECK(t.data[4 * i + 3] == static_cast<float>(gs[i].imag()));
  }

  // A field whose samples are exactly representable in f32 survives the trip.
  std::vector<float> re(g.size()), im(g.size());
  for (std::size_t i = 0; i < re.size(); ++i) {
    re[i] = static_cast<float>(std::sin(0.1 * i));
    im[i] = static_cast<float>(std::cos(0.07 * i));
  }
  std::vector<cplx> exact(g.size());
  for (std::size_t i = 0; i < exact.size(); ++i) exact[i] = cplx(re[i], im[i]);
  const Field phi = to_spectral(g, exact);
  const Tensor in = prepare_input(phi, phi);
  Tensor two({32, 32, 2});
  for (std::size_t i = 0; i < g.size(); ++i) {
    two.data[2 * i] = in.data[4 * i];
    two.data[2 * i + 1] = in.data[4 * i + 1];
  }
  Field back = postprocess(two, g);
  back -= phi;
  CHECK(norm_l2(back) <= 1e-12 * norm_l2(phi));

  // No hidden renormalization.
  Tensor scaled = two;
  for (auto& v : scaled.data) v *= 1.5f;
  CHECK(norm_l2(postprocess(scaled, g)) == doctest::Approx(1.5 * norm_l2(phi)).epsilon(1e-6));
  const Field zero = postprocess(Tensor({32, 32, 2}), g);
  CHECK(norm_l2(zero) == 0.0);
  CHECK_THROWS_AS(postprocess(Tensor({32, 32, 3}), g), ShapeError);
  CHECK_THROWS_AS(prepare_input(phi, Field(make_grid(20.0, 16))), GridError);
}
