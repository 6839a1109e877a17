#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "rdident/common.hpp"

namespace rdident {

// Binary container for time-stacked 2D fields (data, trajectories, masks).
// Layout: magic "RDRD", then u32 LE {version=1, nx, ny, nt_plus_1, n_fields},
// then f64 LE {hx, hy, dt}, then payload: f64 LE, t-major, then field, then
// row y, then column x. Cells outside the domain mask hold NaN, and the NaN
// pattern must be identical across time levels and fields.

struct FieldFileHeader {
  uint32_t nx = 0, ny = 0, nt_plus_1 = 0, n_fields = 0;
  double hx = 0.0, hy = 0.0, dt = 0.0;

  size_t payload_len() const {
    return size_t(nx) * ny * nt_plus_1 * n_fields;
  }
  size_t level_len() const { return size_t(nx) * ny * n_fields; }
};

struct FieldFile {
  FieldFileHeader header;
  std::vector<double> payload;

  double* level_field(int t, int f) {
    return payload.data() + (size_t(t) * header.n_fields + f) * header.nx * header.ny;
  }
  const double* level_field(int t, int f) const {
    return payload.data() + (size_t(t) * header.n_fields + f) * header.nx * header.ny;
  }
};

namespace detail {
inline void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}
inline uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}
inline void put_f64(std::ostream& os, double v) {
  static_assert(sizeof(double) == 8);
  uint64_t u;
  std::memcpy(&u, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}
inline double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= uint64_t(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}
}  // namespace detail

inline void write_field_file(const std::string& path, const FieldFile& ff) {
  if (ff.payload.size() != ff.header.payload_len())
    throw FormatError("field file payload length does not match header");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write field file '" + path + "'");
  os.write("RDRD", 4);
  detail::put_u32(os, 1);
  detail::put_u32(os, ff.header.nx);
  detail::put_u32(os, ff.header.ny);
  detail::put_u32(os, ff.header.nt_plus_1);
  detail::put_u32(os, ff.header.n_fields);
  detail::put_f64(os, ff.header.hx);
  detail::put_f64(os, ff.header.hy);
  detail::put_f64(os, ff.header.dt);
  for (double v : ff.payload) detail::put_f64(os, v);
  if (!os) throw FormatError("short write to field file '" + path + "'");
}

/// Strict reader: rejects bad magic/version, truncated or oversized payload,
/// zero dimensions, and NaN layouts that differ between time levels/fields.
inline FieldFile read_field_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open field file '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "RDRD", 4) != 0)
    throw FormatError(path + ": not a field file (bad magic)");
  const uint32_t version = detail::get_u32(is);
  if (version != 1)
    throw FormatError(path + ": unsupported field file version " + std::to_string(version));
  FieldFile ff;
  ff.header.nx = detail::get_u32(is);
  ff.header.ny = detail::get_u32(is);
  ff.header.nt_plus_1 = detail::get_u32(is);
  ff.header.n_fields = detail::get_u32(is);
  ff.header.hx = detail::get_f64(is);
  ff.header.hy = detail::get_f64(is);
  ff.header.dt = detail::get_f64(is);
  if (!is) throw FormatError(path + ": truncated header");
  if (ff.header.nx == 0 || ff.header.ny == 0 || ff.header.nt_plus_1 == 0 ||
      ff.header.n_fields == 0)
    throw FormatError(path + ": zero dimension in header");
  const size_t len = ff.header.payload_len();
  if (len > (size_t(1) << 31))
    throw FormatError(path + ": payload too large");
  ff.payload.resize(len);
  for (size_t i = 0; i < len; ++i) ff.payload[i] = detail::get_f64(is);
  if (!is) throw FormatError(path + ": truncated payload");
  is.peek();
  if (!is.eof()) throw FormatError(path + ": trailing bytes after payload");

  const size_t plane = size_t(ff.header.nx) * ff.header.ny;
  for (size_t t = 0; t < ff.header.nt_plus_1; ++t)
    for (size_t f = 0; f < ff.header.n_fields; ++f)
      for (size_t c = 0; c < plane; ++c) {
        const bool nan0 = std::isnan(ff.payload[c]);
        const bool nan1 = std::isnan(ff.payload[(t * ff.header.n_fields + f) * plane + c]);
        if (nan0 != nan1)
          throw FormatError(path + ": NaN mask differs between time levels or fields");
      }
  return ff;
}

}  // namespace rdident
