#include "gpeaccel/plot.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "binary_io.hpp"

namespace gpeaccel {

namespace {

constexpr double kStops[5][3] = {
    {0, 0, 4}, {87, 16, 110}, {188, 55, 84}, {249, 142, 9}, {252, 255, 164}};

}  // namespace

std::array<std::uint8_t, 3> colormap(double t) {
  if (!(t > 0.0)) t = 0.0;
  if (t > 1.0) t = 1.0;
  const double s = t * 4.0;
  const int i = std::min(3, static_cast<int>(s));
  const double f = s - i;
  std::array<std::uint8_t, 3> rgb{};
  for (int c = 0; c < 3; ++c)
    rgb[c] = static_cast<std::uint8_t>(std::lround(kStops[i][c] + f * (kStops[i + 1][c] - kStops[i][c])));
  return rgb;
}

std::vector<std::uint8_t> render_density_ppm(const Field& phi, int scale) {
  if (scale < 1) throw Error("plot scale must be >= 1");
  const int n = phi.grid().n();
  const auto samples = to_real(phi);
  std::vector<double> rho(samples.size());
  double peak = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    rho[i] = std::norm(samples[i]);
    peak = std::max(peak, rho[i]);
  }
  const int side = n * scale;
  const std::string header = "P6\n" + std::to_string(side) + " " + std::to_string(side) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + static_cast<std::size_t>(side) * side * 3);
  for (int r = 0; r < side; ++r) {
    const int j = n - 1 - r / scale;
    for (int c = 0; c < side; ++c) {
      const int i = c / scale;
      const double v = peak > 0.0 ? rho[static_cast<std::size_t>(i) * n + j] / peak : 0.0;
      const auto rgb = colormap(v);
      out.insert(out.end(), rgb.begin(), rgb.end());
    }
  }
  return out;
}

void plot_density(const Field& phi, const std::filesystem::path& path, int scale) {
  io::write_file(path, render_density_ppm(phi, scale));
}

}  // namespace gpeaccel
