#include <doctest.h>

#include <set>
#include <sstream>

#include "support.hpp"
#include "vufold/dynamics.hpp"
#include "vufold/wall_model.hpp"

using namespace vufold;

namespace {

struct Grid {
  LabelVolume wall;
  LabelVolume air;
};

// Wall voxels filling the interiors of the given d = 8 lattice cells.
Grid cells_grid(const std::vector<std::array<int, 3>>& cells, GridDims dims = {40, 40, 40}) {
  Grid g{LabelVolume(dims, Vec3::Ones(), label::kBackground),
         LabelVolume(dims, Vec3::Ones(), label::kBackground)};
  for (const auto& c : cells)
    for (int k = c[2] * 8 + 1; k < c[2] * 8 + 8; ++k)
      for (int j = c[1] * 8 + 1; j < c[1] * 8 + 8; ++j)
        for (int i = c[0] * 8 + 1; i < c[0] * 8 + 8; ++i) g.wall.at(i, j, k) = label::kWall;
  return g;
}

std::size_t count_kind(const WallModel& m, SpringKind kind) {
  std::size_t n = 0;
  for (const auto& s : m.springs) n += s.kind == kind;
  return n;
}

}  // namespace

TEST_CASE("single isolated wall cell") {
  const Grid g = cells_grid({{1, 1, 1}});
  for (CellRule rule : {CellRule::kCenterVoxel, CellRule::kWallFraction}) {
    ModelParams p;
    p.cell_rule = rule;
    const WallModel m = build_hex_model(g.wall, g.air, {}, p);
    CHECK(m.vertex_count() == 8);
    CHECK(m.hexahedra.size() == 1);
    CHECK(count_kind(m, SpringKind::kEdge) == 12);
    CHECK(count_kind(m, SpringKind::kFaceDiagonal) == 12);
    CHECK(m.rest[m.hexahedra[0].vertices[0]] == Vec3(8, 8, 8));
    CHECK(m.rest[m.hexahedra[0].vertices[7]] == Vec3(16, 16, 16));
  }
}

TEST_CASE("two x-adjacent cells share a face") {
  const Grid g = cells_grid({{1, 1, 1}, {2, 1, 1}});
  const WallModel m = build_hex_model(g.wall, g.air, {});
  CHECK(m.hexahedra.size() == 2);
  CHECK(m.vertex_count() == 12);
  CHECK(count_kind(m, SpringKind::kEdge) == 20);
  CHECK(count_kind(m, SpringKind::kFaceDiagonal) == 22);
}

TEST_CASE("slice stride follows the spacing ratio") {
  CHECK(slice_stride(8, Vec3(0.7, 0.7, 1.0)) == 6);
  CHECK(slice_stride(8, Vec3(1, 1, 1)) == 8);
  CHECK(slice_stride(2, Vec3(0.5, 0.5, 5.0)) == 1);
}

TEST_CASE("anisotropic lattice cell size") {
  LabelVolume wall({20, 20, 20}, Vec3(0.7, 0.7, 1.0), label::kWall);
  LabelVolume air({20, 20, 20}, Vec3(0.7, 0.7, 1.0), label::kBackground);
  const WallModel m = build_hex_model(wall, air, {});
  CHECK(m.d_hat == 6);
  CHECK(m.cell_size.x() == doctest::Approx(5.6));
  CHECK(m.cell_size.z() == doctest::Approx(6.0));
}

TEST_CASE("isolated hexahedron without air is all outer") {
  const Grid g = cells_grid({{1, 1, 1}});
  const WallModel m = build_hex_model(g.wall, g.air, {});
  const VertexSets s = classify_vertex_sets(m, g.air, {});
  CHECK(s.inner.empty());
  CHECK(s.outer.size() == 8);
  CHECK(s.boundary.empty());
}

TEST_CASE("only the largest component is kept") {
  const Grid g = cells_grid({{0, 0, 0}, {1, 0, 0}, {3, 3, 3}});
  const WallModel m = build_hex_model(g.wall, g.air, {});
  CHECK(m.hexahedra.size() == 2);
  CHECK(m.dropped_components == 1);
  CHECK(m.dropped_hexahedra == 1);
}

TEST_CASE("model parameter validation") {
  ModelParams p;
  p.d = 1;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.density = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.min_wall_fraction = 1.5;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  CHECK(parse_cell_rule("center") == CellRule::kCenterVoxel);
  CHECK(parse_cell_rule(to_string(CellRule::kWallFraction)) == CellRule::kWallFraction);
  CHECK_THROWS_AS(parse_cell_rule("all"), ConfigError);
  const Grid g = cells_grid({});
  CHECK_THROWS_WITH(build_hex_model(g.wall, g.air, {}), doctest::Contains("empty"));
}

TEST_CASE("tube model: inner surface is nearer the axis than the outer surface") {
  const auto& p = test::straight_tube();
  const auto& m = test::straight_model().model;
  const Vec3 axis = p.truth.cardia;
  auto radius = [&](int v) { return std::hypot(m.rest[v].x() - axis.x(), m.rest[v].y() - axis.y()); };
  const std::set<int> inner(m.sets.inner.begin(), m.sets.inner.end());
  double ri = 0, ro = 0;
  int ni = 0, no = 0;
  for (int v : m.sets.inner) {
    ri += radius(v);
    ++ni;
  }
  for (int v : m.sets.outer) {
    if (inner.count(v)) continue;
    ro += radius(v);
    ++no;
  }
  REQUIRE(ni > 0);
  REQUIRE(no > 0);
  CHECK(ri / ni < ro / no);
}

TEST_CASE("incision cells are removed and the cut edge is found") {
  const auto& pm = test::straight_model();
  const auto& m = pm.model;
  CHECK_FALSE(m.incision_cells.empty());
  std::set<std::array<int, 3>> cut(m.incision_cells.begin(), m.incision_cells.end());
  for (const auto& h : m.hexahedra) CHECK(cut.count(h.cell) == 0);

  const auto& b = m.sets.boundary;
  REQUIRE_FALSE(b.empty());
  const std::set<int> inner(m.sets.inner.begin(), m.sets.inner.end());
  const std::set<int> outer(m.sets.outer.begin(), m.sets.outer.end());
  // Slit faces lie within one cell diagonal of the cut polyline.
  const double reach = m.cell_size.norm();
  for (int v : b) {
    CHECK(inner.count(v) == 1);
    CHECK(outer.count(v) == 1);
    CHECK(distance_to_polyline(pm.incision.points, m.rest[v]) <= reach);
  }
}

TEST_CASE("without removed cells the cut edge uses the distance rule") {
  const auto& pm = test::straight_model();
  WallModel m = pm.model;
  m.incision_cells.clear();
  const VertexSets s = classify_vertex_sets(m, pm.air, pm.incision);
  REQUIRE_FALSE(s.boundary.empty());
  const double reach = m.d * m.spacing.maxCoeff();
  for (int v : s.boundary) CHECK(distance_to_polyline(pm.incision.points, m.rest[v]) <= reach + 1e-9);
}

TEST_CASE("spring graph has no duplicates or self springs") {
  const auto& m = test::j_model().model;
  std::set<std::pair<int, int>> seen;
  for (const auto& s : m.springs) {
    CHECK(s.a < s.b);
    CHECK(seen.insert({s.a, s.b}).second);
    CHECK(s.rest_length == doctest::Approx((m.rest[s.a] - m.rest[s.b]).norm()));
  }
}

TEST_CASE("mass is conserved") {
  const auto& m = test::j_model().model;
  const double expected = ModelParams{}.density * m.cell_size.prod() * m.hexahedra.size();
  CHECK(std::abs(m.total_mass() - expected) <= 1e-9 * expected);
}

TEST_CASE("internal forces vanish at rest") {
  const auto& m = test::straight_model().model;
  std::vector<Vec3> zero(m.vertex_count(), Vec3::Zero()), f(m.vertex_count());
  internal_forces(m, m.rest, zero, f);
  double worst = 0.0;
  for (const Vec3& x : f) worst = std::max(worst, x.norm());
  CHECK(worst == 0.0);
}

TEST_CASE("center-voxel rule keeps fewer cells than the wall-fraction rule") {
  const auto& pm = test::straight_model();
  ModelParams p;
  p.cell_rule = CellRule::kCenterVoxel;
  const WallModel center = build_hex_model(pm.wall, pm.air, pm.incision, p);
  CHECK(center.hexahedra.size() + center.dropped_hexahedra <
        pm.model.hexahedra.size() + pm.model.dropped_hexahedra);
}

TEST_CASE("outward normal points away from the lumen") {
  const auto& p = test::straight_tube();
  const auto& air = test::straight_model().air;
  const Vec3 on_wall = p.truth.axis[100] + Vec3(-16, 0, 0);
  const Vec3 n = outward_normal(air, on_wall);
  CHECK(n.x() < -0.9);
  CHECK(outward_normal(air, p.truth.axis[100]).norm() == 0.0);
}

TEST_CASE("model dump format") {
  const Grid g = cells_grid({{1, 1, 1}});
  WallModel m = build_hex_model(g.wall, g.air, {});
  m.sets = classify_vertex_sets(m, g.air, {});
  std::ostringstream out;
  write_model_dump(m, out);
  std::istringstream in(out.str());
  std::string line;
  std::size_t v = 0, s = 0, h = 0, sets = 0;
  while (std::getline(in, line)) {
    const std::string tag = line.substr(0, line.find(' '));
    v += tag == "v";
    s += tag == "s";
    h += tag == "h";
    sets += tag == "set";
  }
  CHECK(v == 8);
  CHECK(s == 24);
  CHECK(h == 1);
  CHECK(sets == 3);
  CHECK(out.str().find("set vo 0 1 2 3 4 5 6 7") != std::string::npos);
}
