// Density heatmaps as binary PPM (P6).
//
// Pixel row r, column c shows sample (i = c, j = n - 1 - r), so x1 grows to
// the right and x2 upwards. Values are |phi|^2 / max |phi|^2 (0 when the
// field vanishes), mapped piecewise-linearly through the colour stops
//   0.00 (0, 0, 4)   0.25 (87, 16, 110)   0.50 (188, 55, 84)
//   0.75 (249, 142, 9)   1.00 (252, 255, 164)
// and rounded to nearest. Each sample becomes a scale x scale block.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "gpeaccel/field.hpp"

namespace gpeaccel {

std::array<std::uint8_t, 3> colormap(double t);

std::vector<std::uint8_t> render_density_ppm(const Field& phi, int scale = 1);
void plot_density(const Field& phi, const std::filesystem::path& path, int scale = 1);

}  // namespace gpeaccel
