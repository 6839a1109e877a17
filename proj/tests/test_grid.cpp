#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "support/helpers.hpp"

using namespace rdident;
using Catch::Approx;

namespace {

/// Disk of radius r centered in an nx x ny box of cell size h.
SpatialGrid disk_grid(int n, double h, double r) {
  std::vector<uint8_t> mask(size_t(n) * n, 0);
  const double cx = 0.5 * n * h, cy = 0.5 * n * h;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double px = (x + 0.5) * h - cx, py = (y + 0.5) * h - cy;
      mask[size_t(y) * n + x] = px * px + py * py <= r * r;
    }
  return SpatialGrid::from_mask(n, n, h, h, std::move(mask));
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("five-point stencil on a unit 3x3 grid") {
  const auto g = SpatialGrid::full(3, 3, 1.0, 1.0);
  REQUIRE(g.n_active == 9);
  std::vector<double> f(9, 0.0), out(9);
  f[4] = 1.0;  // center
  laplacian(g, f, out);
  CHECK(out[4] == -4.0);
  CHECK(out[1] == 1.0);  // edge midpoints see the spike once
  CHECK(out[3] == 1.0);
  CHECK(out[5] == 1.0);
  CHECK(out[7] == 1.0);
  CHECK(out[0] == 0.0);  // corners are not adjacent to the center
  CHECK(out[8] == 0.0);

  // anisotropic spacing scales the axes separately
  const auto ga = SpatialGrid::full(3, 1, 0.5, 1.0);
  std::vector<double> fa = {0.0, 1.0, 0.0}, oa(3);
  laplacian(ga, fa, oa);
  CHECK(oa[1] == Approx(-8.0));  // two neighbors at weight 1/hx^2 = 4
  CHECK(oa[0] == Approx(4.0));
}

TEST_CASE("laplacian is symmetric, zero-sum, and negative semidefinite") {
  const auto g = disk_grid(16, 0.7, 4.9);
  std::mt19937_64 rng(5);
  const auto f = testsup::random_vector(rng, g.n_active, -2.0, 2.0);
  const auto h = testsup::random_vector(rng, g.n_active, -2.0, 2.0);
  std::vector<double> Lf(g.n_active), Lh(g.n_active);
  laplacian(g, f, Lf);
  laplacian(g, h, Lh);

  CHECK(inner_product(g, Lf, h) == Approx(inner_product(g, f, Lh)).margin(1e-10));
  CHECK(integrate(g, Lf) == Approx(0.0).margin(1e-10));
  CHECK(inner_product(g, f, Lf) <= 1e-12);

  std::vector<double> ones(g.n_active, 3.25), Lc(g.n_active);
  laplacian(g, ones, Lc);
  for (int a = 0; a < g.n_active; ++a) CHECK(Lc[a] == 0.0);
}

TEST_CASE("masked disk recovers its area") {
  const double h = 2.0 / 64, r = 0.8;
  const auto g = disk_grid(64, h, r);
  std::vector<double> one(g.n_active, 1.0);
  const double area = integrate(g, one);
  const double exact = std::acos(-1.0) * r * r;
  CHECK(std::abs(area - exact) / exact < 0.05);
}

TEST_CASE("integration and inner products carry the cell weight") {
  const auto g = SpatialGrid::full(2, 2, 0.5, 0.25);
  std::vector<double> f = {1, 2, 3, 4}, h = {2, 2, 2, 2};
  CHECK(integrate(g, f) == Approx(10 * 0.125));
  CHECK(inner_product(g, f, h) == Approx(20 * 0.125));
}

TEST_CASE("degenerate masks are rejected") {
  CHECK_THROWS_AS(SpatialGrid::from_mask(2, 2, 1.0, 1.0, {0, 0, 0, 0}), EmptyDomain);
  CHECK_THROWS_AS(SpatialGrid::from_mask(0, 2, 1.0, 1.0, {}), EmptyDomain);
  CHECK_THROWS_AS(SpatialGrid::from_mask(2, 2, -1.0, 1.0, {1, 1, 1, 1}), EmptyDomain);
  CHECK_THROWS_AS(SpatialGrid::from_mask(2, 2, 1.0, 1.0, {1, 1}), DimensionMismatch);
  // two opposite corners only touch diagonally
  CHECK_THROWS_AS(SpatialGrid::from_mask(2, 2, 1.0, 1.0, {1, 0, 0, 1}), DisconnectedDomain);
  // an L-shape is fine
  CHECK_NOTHROW(SpatialGrid::from_mask(2, 2, 1.0, 1.0, {1, 0, 1, 1}));
}

TEST_CASE("active scatter and gather are inverse") {
  const auto g = disk_grid(12, 1.0, 4.0);
  std::mt19937_64 rng(17);
  const auto f = testsup::random_vector(rng, g.n_active, 0.0, 1.0);
  const auto full = to_full(g, f);
  REQUIRE(static_cast<int>(full.size()) == g.nx * g.ny);
  for (size_t c = 0; c < full.size(); ++c)
    CHECK(std::isnan(full[c]) == (g.active_of_cell[c] < 0));
  const auto back = from_full(g, full.data());
  CHECK(back == f);

  // a NaN in an active cell (or a number in a masked one) is a layout error
  auto bad = full;
  bad[g.cell_of_active[0]] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(from_full(g, bad.data()), FormatError);
}

TEST_CASE("field files round-trip bit for bit") {
  testsup::TmpDir tmp("fieldfile");
  FieldFile ff;
  ff.header = {3, 2, 2, 2, 0.125, 0.5, 0.03125};
  ff.payload.resize(ff.header.payload_len());
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : ff.payload) v = u(rng);
  ff.payload[1] = 0.1;     // not representable exactly; must survive unchanged
  ff.payload[2] = -0.0;
  ff.payload[3] = 1e-310;  // subnormal

  const auto path = tmp.file("t.rdf");
  write_field_file(path, ff);
  const auto back = read_field_file(path);
  CHECK(back.header.nx == 3);
  CHECK(back.header.ny == 2);
  CHECK(back.header.nt_plus_1 == 2);
  CHECK(back.header.n_fields == 2);
  CHECK(back.header.hx == 0.125);
  CHECK(back.header.hy == 0.5);
  CHECK(back.header.dt == 0.03125);
  REQUIRE(back.payload.size() == ff.payload.size());
  for (size_t i = 0; i < ff.payload.size(); ++i) {
    CHECK(back.payload[i] == ff.payload[i]);
    CHECK(std::signbit(back.payload[i]) == std::signbit(ff.payload[i]));
  }
  CHECK(back.level_field(1, 1) - back.payload.data() == 3 * 2 * 3);
}

TEST_CASE("malformed field files are rejected with the reason") {
  testsup::TmpDir tmp("badfile");
  FieldFile ff;
  ff.header = {2, 2, 1, 1, 1.0, 1.0, 0.0};
  ff.payload = {1.0, 2.0, 3.0, 4.0};
  const auto path = tmp.file("ok.rdf");
  write_field_file(path, ff);
  const auto good = slurp(path);

  const auto bad = tmp.file("bad.rdf");
  auto expect_reject = [&](std::string bytes, const std::string& why) {
    spit(bad, bytes);
    CAPTURE(why);
    CHECK_THROWS_AS(read_field_file(bad), FormatError);
  };

  auto b = good;
  b[0] = 'X';
  expect_reject(b, "magic");
  b = good;
  b[4] = 9;
  expect_reject(b, "version");
  expect_reject(good.substr(0, good.size() - 8), "truncated payload");
  expect_reject(good.substr(0, 20), "truncated header");
  expect_reject(good + std::string(4, '\0'), "trailing bytes");
  b = good;
  b[8] = 0;  // nx = 0
  expect_reject(b, "zero dimension");

  // NaN layout must agree across levels
  FieldFile two;
  two.header = {2, 1, 2, 1, 1.0, 1.0, 0.5};
  two.payload = {1.0, std::numeric_limits<double>::quiet_NaN(), 1.0, 2.0};
  CHECK_THROWS_AS(
      [&] {
        write_field_file(tmp.file("nan.rdf"), two);
        return read_field_file(tmp.file("nan.rdf"));
      }(),
      FormatError);

  CHECK_THROWS_AS(read_field_file(tmp.file("missing.rdf")), FormatError);

  // writer refuses payload/header mismatch
  FieldFile short_ff;
  short_ff.header = {2, 2, 1, 1, 1.0, 1.0, 0.0};
  short_ff.payload = {1.0};
  CHECK_THROWS_AS(write_field_file(tmp.file("short.rdf"), short_ff), FormatError);
}

TEST_CASE("masks load in binary and signed-distance conventions") {
  testsup::TmpDir tmp("mask");
  FieldFile ff;
  ff.header = {3, 1, 1, 1, 0.5, 0.5, 0.0};

  ff.payload = {1.0, 1.0, 0.0};
  write_field_file(tmp.file("b.rdf"), ff);
  const auto gb = load_mask(tmp.file("b.rdf"), MaskMode::binary);
  CHECK(gb.n_active == 2);
  CHECK(gb.hx == 0.5);

  ff.payload = {-2.0, 0.0, 0.25};  // boundary value 0 counts as inside
  write_field_file(tmp.file("s.rdf"), ff);
  const auto gs = load_mask(tmp.file("s.rdf"), MaskMode::signed_distance);
  CHECK(gs.n_active == 2);

  // NaN cells are masked out under either convention
  ff.payload = {1.0, std::numeric_limits<double>::quiet_NaN(), 1.0};
  write_field_file(tmp.file("n.rdf"), ff);
  CHECK_THROWS_AS(load_mask(tmp.file("n.rdf"), MaskMode::binary), DisconnectedDomain);

  // a mask is a single level of a single field
  FieldFile multi;
  multi.header = {3, 1, 2, 1, 0.5, 0.5, 0.0};
  multi.payload = {1, 1, 1, 1, 1, 1};
  write_field_file(tmp.file("m.rdf"), multi);
  CHECK_THROWS_AS(load_mask(tmp.file("m.rdf"), MaskMode::binary), FormatError);
}
