#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "rdident/common.hpp"
#include "rdident/fieldfile.hpp"

namespace rdident {

/// Masked cell-centered 2D Cartesian grid. Fields live on the active cells
/// only, in the dense active ordering (row-major over the unmasked cells).
/// The discrete Laplacian uses the 5-point stencil with mirrored ghost values
/// at mask boundaries (homogeneous Neumann); it is symmetric, has zero row
/// sums, and is negative semidefinite with nullspace = constants.
struct SpatialGrid {
  int nx = 0, ny = 0;
  double hx = 1.0, hy = 1.0;
  std::vector<uint8_t> mask;            // nx*ny, row-major y*nx + x, 1 = active
  std::vector<int> active_of_cell;      // -1 where masked out
  std::vector<int> cell_of_active;
  std::vector<std::array<int, 4>> nbr;  // per active cell: W,E,S,N active index or -1
  int n_active = 0;

  double cell_weight() const { return hx * hy; }

  static SpatialGrid full(int nx, int ny, double hx, double hy) {
    return from_mask(nx, ny, hx, hy, std::vector<uint8_t>(size_t(nx) * ny, 1));
  }

  static SpatialGrid from_mask(int nx, int ny, double hx, double hy,
                               std::vector<uint8_t> mask) {
    if (nx <= 0 || ny <= 0 || hx <= 0.0 || hy <= 0.0)
      throw EmptyDomain("grid dimensions must be positive");
    if (mask.size() != size_t(nx) * ny) throw DimensionMismatch("mask size");
    SpatialGrid g;
    g.nx = nx;
    g.ny = ny;
    g.hx = hx;
    g.hy = hy;
    g.mask = std::move(mask);
    g.active_of_cell.assign(size_t(nx) * ny, -1);
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        const int c = y * nx + x;
        if (g.mask[c]) {
          g.active_of_cell[c] = g.n_active++;
          g.cell_of_active.push_back(c);
        }
      }
    if (g.n_active == 0) throw EmptyDomain("mask has no active cells");

    g.nbr.resize(g.n_active);
    for (int a = 0; a < g.n_active; ++a) {
      const int c = g.cell_of_active[a];
      const int x = c % nx, y = c / nx;
      auto at = [&](int xx, int yy) -> int {
        if (xx < 0 || xx >= nx || yy < 0 || yy >= ny) return -1;
        return g.active_of_cell[yy * nx + xx];
      };
      g.nbr[a] = {at(x - 1, y), at(x + 1, y), at(x, y - 1), at(x, y + 1)};
    }

    // 4-connectivity check (the domain must be a single component)
    std::vector<uint8_t> seen(g.n_active, 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    int count = 1;
    while (!q.empty()) {
      const int a = q.front();
      q.pop();
      for (int n : g.nbr[a])
        if (n >= 0 && !seen[n]) {
          seen[n] = 1;
          ++count;
          q.push(n);
        }
    }
    if (count != g.n_active)
      throw DisconnectedDomain("mask has " + std::to_string(g.n_active - count) +
                               " active cells unreachable from the first");
    return g;
  }
};

inline void check_field(const SpatialGrid& g, std::span<const double> f) {
  if (static_cast<int>(f.size()) != g.n_active)
    throw DimensionMismatch("field length does not match active cell count");
}

/// out = Laplacian(f): missing neighbors are mirrored, so their flux term
/// vanishes.
inline void laplacian(const SpatialGrid& g, std::span<const double> f,
                      std::span<double> out) {
  check_field(g, f);
  check_field(g, out);
  const double wx = 1.0 / (g.hx * g.hx), wy = 1.0 / (g.hy * g.hy);
  for (int a = 0; a < g.n_active; ++a) {
    const auto& nb = g.nbr[a];
    double acc = 0.0;
    if (nb[0] >= 0) acc += wx * (f[nb[0]] - f[a]);
    if (nb[1] >= 0) acc += wx * (f[nb[1]] - f[a]);
    if (nb[2] >= 0) acc += wy * (f[nb[2]] - f[a]);
    if (nb[3] >= 0) acc += wy * (f[nb[3]] - f[a]);
    out[a] = acc;
  }
}

inline double integrate(const SpatialGrid& g, std::span<const double> f) {
  check_field(g, f);
  double s = 0.0;
  for (int a = 0; a < g.n_active; ++a) s += f[a];
  return s * g.cell_weight();
}

inline double inner_product(const SpatialGrid& g, std::span<const double> f,
                            std::span<const double> h) {
  check_field(g, f);
  check_field(g, h);
  double s = 0.0;
  for (int a = 0; a < g.n_active; ++a) s += f[a] * h[a];
  return s * g.cell_weight();
}

/// Scatters an active-cell field to the full rectangle with NaN outside.
inline std::vector<double> to_full(const SpatialGrid& g, std::span<const double> f) {
  check_field(g, f);
  std::vector<double> full(size_t(g.nx) * g.ny, std::numeric_limits<double>::quiet_NaN());
  for (int a = 0; a < g.n_active; ++a) full[g.cell_of_active[a]] = f[a];
  return full;
}

/// Gathers a full-rectangle plane onto the active cells; NaN cells must match
/// the mask exactly.
inline std::vector<double> from_full(const SpatialGrid& g, const double* plane) {
  std::vector<double> f(g.n_active);
  for (size_t c = 0; c < size_t(g.nx) * g.ny; ++c) {
    const bool active = g.active_of_cell[c] >= 0;
    if (active != !std::isnan(plane[c]))
      throw FormatError("field NaN layout does not match the grid mask");
    if (active) f[g.active_of_cell[c]] = plane[c];
  }
  return f;
}

enum class MaskMode { binary, signed_distance };

/// Builds a grid from a one-level, one-field file: active where the
/// value is nonzero (binary) or <= 0 (signed distance).
inline SpatialGrid load_mask(const FieldFile& ff, MaskMode mode) {
  if (ff.header.nt_plus_1 != 1 || ff.header.n_fields != 1)
    throw FormatError("a mask file must hold exactly one field at one level");
  std::vector<uint8_t> mask(ff.payload.size());
  for (size_t c = 0; c < ff.payload.size(); ++c) {
    const double v = ff.payload[c];
    if (std::isnan(v))
      mask[c] = 0;
    else
      mask[c] = mode == MaskMode::binary ? (v != 0.0) : (v <= 0.0);
  }
  return SpatialGrid::from_mask(ff.header.nx, ff.header.ny, ff.header.hx, ff.header.hy,
                                std::move(mask));
}

inline SpatialGrid load_mask(const std::string& path, MaskMode mode) {
  return load_mask(read_field_file(path), mode);
}

}  // namespace rdident
