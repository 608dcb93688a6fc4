#include "gpeaccel/state_io.hpp"

#include "binary_io.hpp"

namespace gpeaccel {

std::vector<std::uint8_t> encode_state(const Field& phi) {
  io::Writer w;
  w.bytes("GPST", 4);
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(phi.grid().n()));
  w.f64(phi.grid().a());
  for (const cplx& c : phi.coeffs()) {
    w.f64(c.real());
    w.f64(c.imag());
  }
  return std::move(w.buffer());
}

Field decode_state(std::span<const std::uint8_t> bytes) {
  io::Reader<StateFileError> r(bytes);
  if (bytes.size() < 4) r.fail("truncated data reading magic");
  if (r.str(4, "magic") != "GPST") throw StateFileError("bad state magic at byte offset 0");
  const std::uint32_t version = r.u32("version");
  if (version != 1) throw StateFileError("unsupported state version " + std::to_string(version) + " at byte offset 4");
  const std::uint32_t n = r.u32("grid size");
  const double a = r.f64("box width");
  Grid grid = Grid::make(a, static_cast<int>(n));
  r.need(static_cast<std::size_t>(n) * n * 16, "coefficients");
  Field f(grid);
  for (cplx& c : f.coeffs()) {
    const double re = r.f64("coefficient");
    c = cplx(re, r.f64("coefficient"));
  }
  if (r.remaining() != 0) r.fail("trailing bytes after coefficients");
  return f;
}

void write_state(const Field& phi, const std::filesystem::path& path) { io::write_file(path, encode_state(phi)); }

Field read_state(const std::filesystem::path& path) { return decode_state(io::read_file(path)); }

}  // namespace gpeaccel
