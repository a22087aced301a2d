#include "vufold/wall_model.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

namespace vufold {

namespace {

constexpr std::array<std::array<int, 2>, 12> kEdges{{
    {0, 1}, {2, 3}, {4, 5}, {6, 7},  // along x
    {0, 2}, {1, 3}, {4, 6}, {5, 7},  // along y
    {0, 4}, {1, 5}, {2, 6}, {3, 7},  // along z
}};

constexpr std::array<std::array<int, 2>, 12> kFaceDiagonals{{
    {0, 3}, {1, 2}, {4, 7}, {5, 6},  // z faces
    {0, 5}, {1, 4}, {2, 7}, {3, 6},  // y faces
    {0, 6}, {2, 4}, {1, 7}, {3, 5},  // x faces
}};

constexpr int kKeyBits = 21;
constexpr std::int64_t kKeyOffset = std::int64_t{1} << (kKeyBits - 1);

std::int64_t lattice_key(int a, int b, int c) {
  return ((static_cast<std::int64_t>(c) + kKeyOffset) << (2 * kKeyBits)) |
         ((static_cast<std::int64_t>(b) + kKeyOffset) << kKeyBits) |
         (static_cast<std::int64_t>(a) + kKeyOffset);
}

std::int64_t lattice_key(const std::array<int, 3>& c) { return lattice_key(c[0], c[1], c[2]); }

std::uint64_t pair_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

struct Lattice {
  int d;
  int d_hat;
  std::array<int, 3> stride() const { return {d, d, d_hat}; }
  std::array<int, 3> center_voxel(const std::array<int, 3>& cell) const {
    const auto s = stride();
    return {cell[0] * s[0] + s[0] / 2, cell[1] * s[1] + s[1] / 2, cell[2] * s[2] + s[2] / 2};
  }
};

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

// Cells whose closed voxel box contains some point of the polyline.
std::unordered_set<std::int64_t> cells_on_polyline(const std::vector<Vec3>& pts,
                                                   const Vec3& spacing, const Lattice& lat) {
  std::unordered_set<std::int64_t> out;
  const auto s = lat.stride();
  const double step = 0.25 * spacing.minCoeff();
  auto mark = [&](const Vec3& p) {
    std::array<int, 3> lo{}, hi{};
    for (int a = 0; a < 3; ++a) {
      const double u = p[a] / spacing[a] / s[a];  // position in cell units
      lo[a] = static_cast<int>(std::ceil(u - 1.0 - 1e-9));
      hi[a] = static_cast<int>(std::floor(u + 1e-9));
    }
    for (int c = lo[2]; c <= hi[2]; ++c)
      for (int b = lo[1]; b <= hi[1]; ++b)
        for (int a = lo[0]; a <= hi[0]; ++a) out.insert(lattice_key(a, b, c));
  };
  if (pts.size() == 1) mark(pts.front());
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Vec3 a = pts[i];
    const Vec3 b = pts[i + 1];
    const int n = std::max(1, static_cast<int>(std::ceil((b - a).norm() / step)));
    for (int k = 0; k <= n; ++k) mark(a + (b - a) * (static_cast<double>(k) / n));
  }
  return out;
}

}  // namespace

Vec3 outward_normal(const LabelVolume& air, const Vec3& p, double radius_mm) {
  const Vec3& sp = air.spacing();
  const Index3 c = air.nearest_voxel(p);
  std::array<int, 3> reach{};
  for (int a = 0; a < 3; ++a) reach[a] = static_cast<int>(std::ceil(radius_mm / sp[a]));
  Vec3 acc = Vec3::Zero();
  for (int k = c.k - reach[2]; k <= c.k + reach[2]; ++k)
    for (int j = c.j - reach[1]; j <= c.j + reach[1]; ++j)
      for (int i = c.i - reach[0]; i <= c.i + reach[0]; ++i) {
        if (!air.contains(i, j, k)) continue;
        const Vec3 off = air.world(i, j, k) - p;
        if (off.norm() > radius_mm) continue;
        acc += air.at(i, j, k) == label::kAir ? Vec3(-off) : off;
      }
  const double n = acc.norm();
  return n > 1e-12 ? Vec3(acc / n) : Vec3::Zero();
}

namespace {

bool keeps_cell(const LabelVolume& wall, const Lattice& lat, const std::array<int, 3>& cell,
                const ModelParams& params) {
  const auto c = lat.center_voxel(cell);
  if (params.cell_rule == CellRule::kCenterVoxel) {
    return wall.contains(c[0], c[1], c[2]) && wall.at(c[0], c[1], c[2]) == label::kWall;
  }
  const auto s = lat.stride();
  std::size_t total = 0, hits = 0;
  for (int k = cell[2] * s[2]; k <= (cell[2] + 1) * s[2]; ++k)
    for (int j = cell[1] * s[1]; j <= (cell[1] + 1) * s[1]; ++j)
      for (int i = cell[0] * s[0]; i <= (cell[0] + 1) * s[0]; ++i) {
        ++total;
        hits += wall.contains(i, j, k) && wall.at(i, j, k) == label::kWall;
      }
  return static_cast<double>(hits) >= params.min_wall_fraction * static_cast<double>(total);
}

}  // namespace

std::string to_string(CellRule rule) {
  return rule == CellRule::kCenterVoxel ? "center" : "wall-fraction";
}

CellRule parse_cell_rule(const std::string& text) {
  if (text == "center") return CellRule::kCenterVoxel;
  if (text == "wall-fraction") return CellRule::kWallFraction;
  throw ConfigError("cell_rule must be 'center' or 'wall-fraction', got '" + text + "'");
}

void ModelParams::validate() const {
  if (d < 2) throw ConfigError("d must be at least 2");
  if (!(min_wall_fraction > 0.0 && min_wall_fraction <= 1.0)) {
    throw ConfigError("min_wall_fraction must lie in (0, 1]");
  }
  if (!(density > 0.0)) throw ConfigError("density must be positive");
  if (!(edge_stiffness > 0.0) || !(diagonal_stiffness >= 0.0)) {
    throw ConfigError("spring stiffness must be positive");
  }
  if (!(damping >= 0.0)) throw ConfigError("damping must be non-negative");
}

double WallModel::total_mass() const { return std::accumulate(mass.begin(), mass.end(), 0.0); }

int slice_stride(int d, const Vec3& spacing) {
  const double pixel = spacing.x();
  const double slice = spacing.z();
  return std::max(1, static_cast<int>(std::lround(d * pixel / slice)));
}

WallModel build_hex_model(const LabelVolume& wall, const LabelVolume& air,
                          const IncisionLine& incision, const ModelParams& params) {
  params.validate();
  if (!(wall.dims() == air.dims())) throw ConfigError("wall and air volumes differ in geometry");
  if (count_label(wall, label::kWall) == 0) throw Error("wall region is empty");

  const Vec3& sp = wall.spacing();
  const Lattice lat{params.d, slice_stride(params.d, sp)};
  const auto stride = lat.stride();
  const GridDims& g = wall.dims();
  const std::array<int, 3> ncell{(g.nx + stride[0] - 1) / stride[0],
                                 (g.ny + stride[1] - 1) / stride[1],
                                 (g.nz + stride[2] - 1) / stride[2]};

  // The cut runs from the inner surface outward through one cell depth.
  std::vector<std::vector<Vec3>> cut_paths{incision.points};
  const double depth = params.d * sp.maxCoeff();
  for (const Vec3& u : incision.points) {
    const Vec3 out = outward_normal(air, u);
    if (out.squaredNorm() > 0.0) cut_paths.push_back({u, u + depth * out});
  }
  std::unordered_set<std::int64_t> cut;
  for (const auto& path : cut_paths) {
    const auto cells = cells_on_polyline(path, sp, lat);
    cut.insert(cells.begin(), cells.end());
  }

  WallModel model;
  model.d = lat.d;
  model.d_hat = lat.d_hat;
  model.spacing = sp;
  model.cell_size = Vec3(stride[0] * sp.x(), stride[1] * sp.y(), stride[2] * sp.z());

  std::vector<std::array<int, 3>> cells;
  for (int c = 0; c < ncell[2]; ++c)
    for (int b = 0; b < ncell[1]; ++b)
      for (int a = 0; a < ncell[0]; ++a) {
        const std::array<int, 3> cell{a, b, c};
        if (!keeps_cell(wall, lat, cell, params)) continue;
        if (cut.count(lattice_key(cell))) {
          model.incision_cells.push_back(cell);
          continue;
        }
        cells.push_back(cell);
      }
  if (cells.empty()) {
    throw Error("no lattice cell fits the wall region; d is too large");
  }

  // Components over shared lattice vertices.
  UnionFind uf(cells.size());
  std::unordered_map<std::int64_t, std::size_t> first_owner;
  for (std::size_t h = 0; h < cells.size(); ++h) {
    for (int corner = 0; corner < 8; ++corner) {
      const auto& cl = cells[h];
      const std::int64_t key =
          lattice_key(cl[0] + (corner & 1), cl[1] + ((corner >> 1) & 1), cl[2] + ((corner >> 2) & 1));
      auto [it, inserted] = first_owner.emplace(key, h);
      if (!inserted) uf.unite(h, it->second);
    }
  }
  std::unordered_map<std::size_t, std::size_t> component_size;
  for (std::size_t h = 0; h < cells.size(); ++h) ++component_size[uf.find(h)];
  std::size_t keep = uf.find(0);
  for (const auto& [root, size] : component_size) {
    const std::size_t best = component_size[keep];
    if (size > best || (size == best && root < keep)) keep = root;
  }
  model.dropped_components = component_size.size() - 1;

  const double cell_volume = model.cell_size.prod();
  const double corner_mass = params.density * cell_volume / 8.0;
  std::unordered_map<std::int64_t, int> vertex_of;
  std::unordered_map<std::uint64_t, int> spring_of;

  auto add_spring = [&](int a, int b, SpringKind kind) {
    const auto [it, inserted] = spring_of.emplace(pair_key(a, b), 0);
    if (!inserted) return;
    it->second = static_cast<int>(model.springs.size());
    Spring s;
    s.a = std::min(a, b);
    s.b = std::max(a, b);
    s.rest_length = (model.rest[a] - model.rest[b]).norm();
    s.stiffness = kind == SpringKind::kEdge ? params.edge_stiffness : params.diagonal_stiffness;
    s.damping = params.damping;
    s.kind = kind;
    model.springs.push_back(s);
  };

  for (std::size_t h = 0; h < cells.size(); ++h) {
    if (uf.find(h) != keep) {
      ++model.dropped_hexahedra;
      continue;
    }
    const auto& cl = cells[h];
    Hexahedron hex;
    hex.cell = cl;
    const auto cv = lat.center_voxel(cl);
    hex.center_voxel = wall.index(std::min(cv[0], g.nx - 1), std::min(cv[1], g.ny - 1),
                                  std::min(cv[2], g.nz - 1));
    for (int corner = 0; corner < 8; ++corner) {
      const int a = cl[0] + (corner & 1);
      const int b = cl[1] + ((corner >> 1) & 1);
      const int c = cl[2] + ((corner >> 2) & 1);
      auto [it, inserted] = vertex_of.emplace(lattice_key(a, b, c), 0);
      if (inserted) {
        it->second = static_cast<int>(model.rest.size());
        model.rest.emplace_back(a * stride[0] * sp.x(), b * stride[1] * sp.y(),
                                c * stride[2] * sp.z());
        model.mass.push_back(0.0);
      }
      hex.vertices[corner] = it->second;
      model.mass[it->second] += corner_mass;
    }
    for (const auto& e : kEdges) {
      add_spring(hex.vertices[e[0]], hex.vertices[e[1]], SpringKind::kEdge);
    }
    for (const auto& e : kFaceDiagonals) {
      add_spring(hex.vertices[e[0]], hex.vertices[e[1]], SpringKind::kFaceDiagonal);
    }
    model.hexahedra.push_back(hex);
  }
  return model;
}

VertexSets classify_vertex_sets(const WallModel& model, const LabelVolume& air,
                                const IncisionLine& incision) {
  std::unordered_set<std::int64_t> present;
  for (const auto& h : model.hexahedra) present.insert(lattice_key(h.cell));
  std::unordered_set<std::int64_t> cut;
  for (const auto& c : model.incision_cells) cut.insert(lattice_key(c));

  const std::array<int, 3> stride{model.d, model.d, model.d_hat};
  std::unordered_map<std::int64_t, bool> air_cache;
  auto overlaps_air = [&](const std::array<int, 3>& cell) {
    const std::int64_t key = lattice_key(cell);
    if (auto it = air_cache.find(key); it != air_cache.end()) return it->second;
    bool hit = false;
    const GridDims& g = air.dims();
    const int i0 = std::max(0, cell[0] * stride[0]), i1 = std::min(g.nx - 1, (cell[0] + 1) * stride[0]);
    const int j0 = std::max(0, cell[1] * stride[1]), j1 = std::min(g.ny - 1, (cell[1] + 1) * stride[1]);
    const int k0 = std::max(0, cell[2] * stride[2]), k1 = std::min(g.nz - 1, (cell[2] + 1) * stride[2]);
    for (int k = k0; k <= k1 && !hit; ++k)
      for (int j = j0; j <= j1 && !hit; ++j)
        for (int i = i0; i <= i1; ++i)
          if (air.at(i, j, k) == label::kAir) {
            hit = true;
            break;
          }
    air_cache.emplace(key, hit);
    return hit;
  };

  std::vector<std::uint8_t> inner(model.vertex_count(), 0), outer(model.vertex_count(), 0);
  std::vector<std::uint8_t> slit(model.vertex_count(), 0);
  for (const auto& h : model.hexahedra) {
    for (int axis = 0; axis < 3; ++axis) {
      for (int side = 0; side < 2; ++side) {
        auto nb = h.cell;
        nb[axis] += side == 0 ? -1 : 1;
        if (present.count(lattice_key(nb))) continue;
        const bool on_slit = cut.count(lattice_key(nb)) > 0;
        const bool is_inner = on_slit || overlaps_air(nb);
        auto& target = is_inner ? inner : outer;
        for (int corner = 0; corner < 8; ++corner) {
          if (((corner >> axis) & 1) != side) continue;
          target[h.vertices[corner]] = 1;
          if (on_slit) slit[h.vertices[corner]] = 1;
        }
      }
    }
  }

  VertexSets sets;
  // Cut-edge vertices: on both surfaces and on a face bordering the slit.
  // Without a slit (no cells removed) fall back to proximity to the incision.
  const double reach = model.d * model.spacing.maxCoeff();
  for (int v = 0; v < static_cast<int>(model.vertex_count()); ++v) {
    if (outer[v]) sets.outer.push_back(v);
    if (inner[v]) sets.inner.push_back(v);
    if (!outer[v] || !inner[v]) continue;
    const bool near_cut =
        cut.empty() ? distance_to_polyline(incision.points, model.rest[v]) <= reach + 1e-9
                    : slit[v] != 0;
    if (near_cut) sets.boundary.push_back(v);
  }
  return sets;
}

void write_model_dump(const WallModel& model, std::ostream& out) {
  const auto precision = out.precision(17);
  for (std::size_t i = 0; i < model.rest.size(); ++i) {
    const Vec3& r = model.rest[i];
    out << "v " << i << ' ' << r.x() << ' ' << r.y() << ' ' << r.z() << ' ' << model.mass[i]
        << '\n';
  }
  for (const auto& s : model.springs) {
    out << "s " << s.a << ' ' << s.b << ' ' << s.rest_length << ' ' << s.stiffness << ' '
        << (s.kind == SpringKind::kEdge ? "edge" : "diagonal") << '\n';
  }
  for (std::size_t h = 0; h < model.hexahedra.size(); ++h) {
    out << "h " << h;
    for (int v : model.hexahedra[h].vertices) out << ' ' << v;
    out << '\n';
  }
  auto dump_set = [&](const char* name, const std::vector<int>& ids) {
    out << "set " << name;
    for (int v : ids) out << ' ' << v;
    out << '\n';
  };
  dump_set("vo", model.sets.outer);
  dump_set("vi", model.sets.inner);
  dump_set("vb", model.sets.boundary);
  out.precision(precision);
}

}  // namespace vufold
