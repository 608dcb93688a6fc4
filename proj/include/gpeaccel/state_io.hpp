// State files: "GPST" | u32 version (1) | u32 n | f64 a | n*n (f64 re, f64 im)
// spectral coefficients, little-endian.
#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "gpeaccel/field.hpp"

namespace gpeaccel {

class StateFileError : public Error {
 public:
  using Error::Error;
};

std::vector<std::uint8_t> encode_state(const Field& phi);
/// Returns the raw field; callers wrap it as a State if needed.
Field decode_state(std::span<const std::uint8_t> bytes);
void write_state(const Field& phi, const std::filesystem::path& path);
Field read_state(const std::filesystem::path& path);

}  // namespace gpeaccel
