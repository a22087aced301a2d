#include <doctest.h>

#include <sstream>

#include "support.hpp"
#include "vufold/unfolded_view.hpp"

using namespace vufold;

namespace {

double wall_like_fraction(const UnfoldedVolume& u) {
  std::size_t masked = 0, wall = 0;
  const auto v = u.values.data();
  const auto m = u.mask.data();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!m[i]) continue;
    ++masked;
    wall += v[i] > -500;
  }
  return masked ? static_cast<double>(wall) / static_cast<double>(masked) : 0.0;
}

// Side view of the straight tube: normal along x, so the whole footprint is solid.
UnfoldPlane side_plane() {
  UnfoldPlane p;
  p.normal = Vec3::UnitX();
  p.v1 = Vec3::UnitY();
  p.v2 = Vec3::UnitZ();
  p.point = Vec3::Zero();
  return p;
}

HexCorners unit_cube() {
  HexCorners c;
  for (int i = 0; i < 8; ++i) c[i] = Vec3(i & 1, (i >> 1) & 1, (i >> 2) & 1);
  return c;
}

}  // namespace

TEST_CASE("grid covers the deformed footprint plus margin") {
  UnfoldPlane plane;  // v1 = x, v2 = y, n = z through the origin
  const std::vector<Vec3> pts{{0, 0, 0}, {100, 0, 0}, {0, 60, 0}, {100, 60, 0}, {40, 20, 0}};
  const UnfoldedGrid g = build_unfolded_grid(plane, pts, Vec3::Ones(), 5.0);
  CHECK((g.origin - Vec3(-5, -5, 0)).norm() < 1e-12);
  CHECK(g.dims == GridDims{111, 71, 1});
  CHECK((g.world(110, 70, 0) - Vec3(105, 65, 0)).norm() < 1e-12);
  CHECK((g.to_grid(Vec3(105, 65, 0)) - Vec3(110, 70, 0)).norm() < 1e-12);
}

TEST_CASE("single vertex with no margin is a one-voxel grid") {
  UnfoldPlane plane;
  const std::vector<Vec3> pts{{3, 4, 5}};
  const UnfoldedGrid g = build_unfolded_grid(plane, pts, Vec3(0.7, 0.7, 1.0), 0.0);
  CHECK(g.dims == GridDims{1, 1, 1});
  CHECK((g.origin - Vec3(3, 4, 5)).norm() < 1e-12);
  CHECK_THROWS_AS(build_unfolded_grid(plane, std::vector<Vec3>{}, Vec3::Ones(), 0.0), Error);
  CHECK_THROWS_AS(build_unfolded_grid(plane, pts, Vec3::Ones(), -1.0), ConfigError);
}

TEST_CASE("trilinear map of a unit cube is the identity") {
  const HexCorners c = unit_cube();
  const Vec3 xi(0.2, 0.7, 0.4);
  CHECK((trilinear_map(c, xi) - xi).norm() < 1e-15);
  CHECK((trilinear_jacobian(c, xi) - Eigen::Matrix3d::Identity()).norm() < 1e-15);
}

TEST_CASE("Newton inversion reproduces the query point") {
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> jitter(-0.2, 0.2), unit(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    HexCorners c = unit_cube();
    for (Vec3& p : c) p = 6.0 * p + Vec3(jitter(rng), jitter(rng), jitter(rng));
    const Vec3 xi(unit(rng), unit(rng), unit(rng));
    const Vec3 q = trilinear_map(c, xi);
    const InverseResult r = invert_trilinear(c, q);
    REQUIRE(r.converged);
    CHECK(r.steps <= 10);
    CHECK((r.xi - xi).norm() < 1e-6);
    CHECK((trilinear_map(c, r.xi) - q).norm() < 1e-5);
  }
}

TEST_CASE("collapsed hexahedron does not invert") {
  HexCorners c = unit_cube();
  for (Vec3& p : c) p.z() = 0.0;
  CHECK_FALSE(invert_trilinear(c, Vec3(0.5, 0.5, 0.0)).converged);
}

TEST_CASE("identity deformation reproduces direct sampling") {
  const auto& p = test::straight_tube();
  const auto& m = test::straight_model().model;
  const UnfoldPlane plane = side_plane();
  const UnfoldedGrid grid = build_unfolded_grid(plane, m.rest, p.scalar.spacing(), 0.0);
  const UnfoldedVolume u = resample_unfolded(p.scalar, m, m.rest, m.rest, grid, plane);
  REQUIRE(u.metrics.masked_voxels > 0);
  std::size_t mismatched = 0;
  for (int k = 0; k < grid.dims.nz; ++k)
    for (int j = 0; j < grid.dims.ny; ++j)
      for (int i = 0; i < grid.dims.nx; ++i) {
        if (!u.mask.at(i, j, k)) {
          mismatched += u.values.at(i, j, k) != kBackgroundValue;
          continue;
        }
        const double direct = std::round(trilinear_sample(p.scalar, grid.world(i, j, k)));
        mismatched += std::abs(u.values.at(i, j, k) - direct) > 1e-6;
      }
  CHECK(mismatched == 0);
  CHECK(u.metrics.overlap_fraction == 0.0);
  CHECK(u.metrics.broken_fraction == 0.0);
  CHECK(u.metrics.degenerate_hexahedra == 0);
  CHECK(u.metrics.newton_failures == 0);
}

TEST_CASE("rigid translation leaves the unfolded volume unchanged") {
  const auto& p = test::straight_tube();
  const auto& m = test::straight_model().model;
  const UnfoldPlane plane = side_plane();
  const Vec3 t(3.25, -11.5, 40.0);
  UnfoldPlane moved = plane;
  moved.point += t;
  std::vector<Vec3> shifted = m.rest;
  for (Vec3& x : shifted) x += t;

  const auto a = resample_unfolded(p.scalar, m, m.rest, m.rest,
                                   build_unfolded_grid(plane, m.rest, p.scalar.spacing()), plane);
  const auto b = resample_unfolded(p.scalar, m, m.rest, shifted,
                                   build_unfolded_grid(moved, shifted, p.scalar.spacing()), moved);
  CHECK(a.values == b.values);
  CHECK(a.mask == b.mask);
}

TEST_CASE("unfolding preserves the wall content of the model") {
  // With 8 mm cells over a 4 mm wall, the cells also cover lumen and
  // background; the unfolded sheet must keep the share the model holds.
  const auto& p = test::straight_tube();
  const auto& run = test::straight_run();
  const auto& m = run.prepared.model;
  const auto& plane = run.prepared.geometry.plane;
  const auto identity = resample_unfolded(
      p.scalar, m, m.rest, m.rest, build_unfolded_grid(plane, m.rest, p.scalar.spacing()), plane);
  const double before = wall_like_fraction(identity);
  const double after = wall_like_fraction(run.view);
  MESSAGE("wall-like fraction: model " << before << ", unfolded " << after);
  CHECK(after >= 0.9 * before);
}

TEST_CASE("defect metrics are fractions") {
  const auto& mtr = test::straight_run().view.metrics;
  CHECK(mtr.overlap_fraction >= 0.0);
  CHECK(mtr.overlap_fraction <= 1.0);
  CHECK(mtr.broken_fraction >= 0.0);
  CHECK(mtr.broken_fraction <= 1.0);
  CHECK(mtr.bending_rms_mm >= 0.0);
}

TEST_CASE("bending is the RMS centroid distance to the plane") {
  const auto& m = test::straight_model().model;
  UnfoldPlane plane;
  plane.normal = Vec3::UnitZ();
  std::vector<Vec3> flat = m.rest;
  for (Vec3& x : flat) x.z() = 0.0;
  CHECK(bending_rms(m, flat, plane) == 0.0);
  for (Vec3& x : flat) x.z() = 3.0;
  CHECK(bending_rms(m, flat, plane) == doctest::Approx(3.0));
}

TEST_CASE("window transfer") {
  CHECK(window_value(40, 40, 400) == 128);
  CHECK(window_value(-160, 40, 400) == 0);
  CHECK(window_value(240, 40, 400) == 255);
  CHECK(window_value(-5000, 40, 400) == 0);
  CHECK(window_value(5000, 40, 400) == 255);
  CHECK_THROWS_AS(window_value(0, 0, 0), ConfigError);
}

TEST_CASE("render of a uniform volume") {
  ScalarVolume v({4, 3, 5}, Vec3::Ones(), 40);
  LabelVolume mask({4, 3, 5}, Vec3::Ones(), 1);
  mask.at(2, 1, 0) = 0;
  for (int k = 0; k < 5; ++k) mask.at(3, 2, k) = 0;
  for (RenderMode mode : {RenderMode::kMip, RenderMode::kSlabAverage}) {
    const Image img = render_view(v, mask, 40, 400, mode);
    CHECK(img.width == 4);
    CHECK(img.height == 3);
    CHECK(img.at(0, 0) == 128);
    CHECK(img.at(2, 1) == 128);
    CHECK(img.at(3, 2) == 0);
  }
}

TEST_CASE("render of an empty mask is black") {
  const ScalarVolume v({3, 3, 3}, Vec3::Ones(), 40);
  const LabelVolume mask({3, 3, 3}, Vec3::Ones(), 0);
  const Image img = render_view(v, mask, 40, 400, RenderMode::kMip);
  for (auto px : img.pixels) CHECK(px == 0);
  CHECK_THROWS_AS(render_view(v, mask, 40, 0, RenderMode::kMip), ConfigError);
}

TEST_CASE("mip is never darker than the slab average") {
  std::mt19937 rng(17);
  std::uniform_int_distribution<int> value(-1024, 400), bit(0, 1);
  ScalarVolume v({16, 12, 6}, Vec3::Ones(), 0);
  LabelVolume mask({16, 12, 6}, Vec3::Ones(), 0);
  for (auto& x : v.data()) x = static_cast<std::int16_t>(value(rng));
  for (auto& x : mask.data()) x = static_cast<std::uint8_t>(bit(rng));
  const Image mip = render_view(v, mask, 40, 400, RenderMode::kMip);
  const Image avg = render_view(v, mask, 40, 400, RenderMode::kSlabAverage);
  for (std::size_t i = 0; i < mip.pixels.size(); ++i) CHECK(mip.pixels[i] >= avg.pixels[i]);
  CHECK(parse_render_mode("slab-average") == RenderMode::kSlabAverage);
  CHECK(to_string(RenderMode::kMip) == "mip");
  CHECK_THROWS_AS(parse_render_mode("shaded"), ConfigError);
}

TEST_CASE("greymap output is deterministic") {
  Image img{3, 2, {0, 1, 2, 3, 4, 255}};
  std::ostringstream a, b;
  write_pgm(img, a);
  write_pgm(img, b);
  CHECK(a.str() == b.str());
  CHECK(a.str() == std::string("P5\n3 2\n255\n\x00\x01\x02\x03\x04\xff", 17));
  const auto& run = test::straight_run();
  const Image again = render_view(run.view.values, run.view.mask, 40, 400, RenderMode::kMip);
  CHECK(again.pixels == run.image.pixels);
}
