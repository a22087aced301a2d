#include "vufold/unfolded_view.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <ostream>
#include <unordered_map>

#include <Eigen/LU>

namespace vufold {

Vec3 UnfoldedGrid::to_grid(const Vec3& p) const {
  const Vec3 d = p - origin;
  return {d.dot(axes[0]) / spacing[0], d.dot(axes[1]) / spacing[1], d.dot(axes[2]) / spacing[2]};
}

UnfoldedGrid build_unfolded_grid(const UnfoldPlane& plane, std::span<const Vec3> deformed,
                                 const Vec3& spacing, double margin_mm) {
  if (deformed.empty()) throw Error("unfolded grid: empty model");
  if (!(margin_mm >= 0.0)) throw ConfigError("unfolded grid margin must be non-negative");
  UnfoldedGrid grid;
  grid.axes = {plane.v1, plane.v2, plane.normal};
  grid.spacing = spacing;
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const Vec3& p : deformed) {
    const Vec3 d = p - plane.point;
    const Vec3 c(d.dot(plane.v1), d.dot(plane.v2), d.dot(plane.normal));
    lo = lo.cwiseMin(c);
    hi = hi.cwiseMax(c);
  }
  lo.head<2>().array() -= margin_mm;
  hi.head<2>().array() += margin_mm;
  int n[3];
  for (int a = 0; a < 3; ++a) {
    n[a] = static_cast<int>(std::floor((hi[a] - lo[a]) / spacing[a] + 1e-9)) + 1;
  }
  grid.dims = {n[0], n[1], n[2]};
  grid.origin = plane.point + lo[0] * plane.v1 + lo[1] * plane.v2 + lo[2] * plane.normal;
  return grid;
}

HexCorners hex_corners(const Hexahedron& hex, std::span<const Vec3> positions) {
  HexCorners c;
  for (int i = 0; i < 8; ++i) c[i] = positions[hex.vertices[i]];
  return c;
}

Vec3 trilinear_map(const HexCorners& c, const Vec3& xi) {
  Vec3 p = Vec3::Zero();
  for (int i = 0; i < 8; ++i) {
    const double wx = (i & 1) ? xi.x() : 1.0 - xi.x();
    const double wy = (i & 2) ? xi.y() : 1.0 - xi.y();
    const double wz = (i & 4) ? xi.z() : 1.0 - xi.z();
    p += wx * wy * wz * c[i];
  }
  return p;
}

Eigen::Matrix3d trilinear_jacobian(const HexCorners& c, const Vec3& xi) {
  Eigen::Matrix3d j = Eigen::Matrix3d::Zero();
  for (int i = 0; i < 8; ++i) {
    const double sx = (i & 1) ? 1.0 : -1.0, sy = (i & 2) ? 1.0 : -1.0, sz = (i & 4) ? 1.0 : -1.0;
    const double wx = (i & 1) ? xi.x() : 1.0 - xi.x();
    const double wy = (i & 2) ? xi.y() : 1.0 - xi.y();
    const double wz = (i & 4) ? xi.z() : 1.0 - xi.z();
    j.col(0) += sx * wy * wz * c[i];
    j.col(1) += wx * sy * wz * c[i];
    j.col(2) += wx * wy * sz * c[i];
  }
  return j;
}

InverseResult invert_trilinear(const HexCorners& c, const Vec3& q, int max_steps,
                               double tolerance) {
  InverseResult r;
  for (r.steps = 1; r.steps <= max_steps; ++r.steps) {
    const Eigen::Matrix3d j = trilinear_jacobian(c, r.xi);
    Eigen::PartialPivLU<Eigen::Matrix3d> lu(j);
    if (!(std::abs(lu.determinant()) > 1e-12)) return r;
    const Vec3 delta = lu.solve(q - trilinear_map(c, r.xi));
    if (!delta.allFinite()) return r;
    r.xi += delta;
    if (delta.norm() <= tolerance) {
      r.converged = true;
      return r;
    }
  }
  r.steps = max_steps;
  return r;
}

double bending_rms(const WallModel& model, std::span<const Vec3> deformed,
                   const UnfoldPlane& plane) {
  if (model.hexahedra.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& h : model.hexahedra) {
    Vec3 c = Vec3::Zero();
    for (int v : h.vertices) c += deformed[v];
    const double d = plane.signed_distance(c / 8.0);
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(model.hexahedra.size()));
}

namespace {

constexpr double kInsideTolerance = 1e-6;

bool inside(const Vec3& xi, double tol) {
  return (xi.array() >= -tol).all() && (xi.array() <= 1.0 + tol).all();
}

// Uniform hash over hexahedron bounding boxes in grid coordinates.
class HexHash {
 public:
  HexHash(const std::vector<std::array<Vec3, 2>>& boxes, const std::vector<int>& ids) {
    double extent = 1.0;
    for (int id : ids) extent = std::max(extent, (boxes[id][1] - boxes[id][0]).maxCoeff());
    cell_ = extent;
    for (int id : ids) {
      const auto lo = bin(boxes[id][0]), hi = bin(boxes[id][1]);
      for (int z = lo[2]; z <= hi[2]; ++z)
        for (int y = lo[1]; y <= hi[1]; ++y)
          for (int x = lo[0]; x <= hi[0]; ++x) bins_[key({x, y, z})].push_back(id);
    }
  }

  const std::vector<int>* candidates(const Vec3& g) const {
    const auto it = bins_.find(key(bin(g)));
    return it == bins_.end() ? nullptr : &it->second;
  }

 private:
  std::array<int, 3> bin(const Vec3& g) const {
    return {static_cast<int>(std::floor(g.x() / cell_)), static_cast<int>(std::floor(g.y() / cell_)),
            static_cast<int>(std::floor(g.z() / cell_))};
  }
  static std::int64_t key(const std::array<int, 3>& b) {
    const auto part = [](int v) { return static_cast<std::int64_t>(v + (1 << 20)) & 0x1FFFFF; };
    return part(b[0]) | (part(b[1]) << 21) | (part(b[2]) << 42);
  }

  double cell_ = 1.0;
  std::unordered_map<std::int64_t, std::vector<int>> bins_;
};

double broken_fraction(const LabelVolume& mask, std::size_t masked) {
  if (masked == 0) return 0.0;
  const GridDims& g = mask.dims();
  const auto column = [&](int i, int j) { return static_cast<std::size_t>(j) * g.nx + i; };
  std::vector<std::uint8_t> footprint(static_cast<std::size_t>(g.nx) * g.ny, 0);
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        if (mask.at(i, j, k)) footprint[column(i, j)] = 1;

  // Empty columns reachable from the border are outside; the rest are holes.
  std::vector<std::uint8_t> outside(footprint.size(), 0);
  std::deque<std::pair<int, int>> queue;
  auto push = [&](int i, int j) {
    if (i < 0 || j < 0 || i >= g.nx || j >= g.ny) return;
    const std::size_t c = column(i, j);
    if (footprint[c] || outside[c]) return;
    outside[c] = 1;
    queue.emplace_back(i, j);
  };
  for (int i = 0; i < g.nx; ++i) {
    push(i, 0);
    push(i, g.ny - 1);
  }
  for (int j = 0; j < g.ny; ++j) {
    push(0, j);
    push(g.nx - 1, j);
  }
  while (!queue.empty()) {
    const auto [i, j] = queue.front();
    queue.pop_front();
    push(i - 1, j);
    push(i + 1, j);
    push(i, j - 1);
    push(i, j + 1);
  }
  auto hole = [&](int i, int j) {
    if (i < 0 || j < 0 || i >= g.nx || j >= g.ny) return false;
    const std::size_t c = column(i, j);
    return !footprint[c] && !outside[c];
  };
  std::size_t broken = 0;
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        if (mask.at(i, j, k) &&
            (hole(i - 1, j) || hole(i + 1, j) || hole(i, j - 1) || hole(i, j + 1))) {
          ++broken;
        }
  return static_cast<double>(broken) / static_cast<double>(masked);
}

}  // namespace

UnfoldedVolume resample_unfolded(const ScalarVolume& source, const WallModel& model,
                                 std::span<const Vec3> rest, std::span<const Vec3> deformed,
                                 const UnfoldedGrid& grid, const UnfoldPlane& plane) {
  if (model.hexahedra.empty()) throw Error("resample: model has no hexahedra");
  if (rest.size() != model.vertex_count() || deformed.size() != model.vertex_count()) {
    throw Error("resample: position count does not match the model");
  }
  UnfoldedVolume out;
  out.grid = grid;
  out.values = ScalarVolume(grid.dims, grid.spacing, kBackgroundValue);
  out.mask = LabelVolume(grid.dims, grid.spacing, 0);
  DefectMetrics& m = out.metrics;

  const std::size_t hex_count = model.hexahedra.size();
  std::vector<HexCorners> warped(hex_count), source_corners(hex_count);
  std::vector<std::array<Vec3, 2>> boxes(hex_count);
  std::vector<int> usable;
  for (std::size_t h = 0; h < hex_count; ++h) {
    warped[h] = hex_corners(model.hexahedra[h], deformed);
    source_corners[h] = hex_corners(model.hexahedra[h], rest);
    if (!(trilinear_jacobian(warped[h], Vec3::Constant(0.5)).determinant() > 0.0)) {
      ++m.degenerate_hexahedra;
      continue;
    }
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
    for (const Vec3& p : warped[h]) {
      const Vec3 g = grid.to_grid(p);
      lo = lo.cwiseMin(g);
      hi = hi.cwiseMax(g);
    }
    boxes[h] = {lo, hi};
    usable.push_back(static_cast<int>(h));
  }
  const HexHash hash(boxes, usable);

  std::size_t overlapping = 0;
  const GridDims& g = grid.dims;
  for (int k = 0; k < g.nz; ++k) {
    for (int j = 0; j < g.ny; ++j) {
      for (int i = 0; i < g.nx; ++i) {
        const Vec3 gq(i, j, k);
        const auto* cands = hash.candidates(gq);
        if (!cands) continue;
        const Vec3 q = grid.world(i, j, k);
        int owner = -1;
        Vec3 owner_xi;
        int strict = 0;
        bool failed = false;
        for (int h : *cands) {
          const auto& box = boxes[h];
          if ((gq.array() < box[0].array() - 1e-9).any() ||
              (gq.array() > box[1].array() + 1e-9).any()) {
            continue;
          }
          const InverseResult inv = invert_trilinear(warped[h], q);
          if (!inv.converged) {
            failed = true;
            continue;
          }
          if (!inside(inv.xi, kInsideTolerance)) continue;
          if (owner < 0) {
            owner = h;
            owner_xi = inv.xi;
          }
          if (inside(inv.xi, -kInsideTolerance)) ++strict;
        }
        if (owner < 0) {
          if (failed) ++m.newton_failures;
          continue;
        }
        const Vec3 src = trilinear_map(source_corners[owner], owner_xi);
        const double v = std::round(trilinear_sample(source, src));
        out.values.at(i, j, k) = static_cast<std::int16_t>(std::clamp(v, -32768.0, 32767.0));
        out.mask.at(i, j, k) = 1;
        ++m.masked_voxels;
        if (strict > 1) ++overlapping;
      }
    }
  }
  if (m.masked_voxels > 0) {
    m.overlap_fraction = static_cast<double>(overlapping) / static_cast<double>(m.masked_voxels);
  }
  m.broken_fraction = broken_fraction(out.mask, m.masked_voxels);
  m.bending_rms_mm = bending_rms(model, deformed, plane);
  return out;
}

std::string to_string(RenderMode mode) {
  return mode == RenderMode::kMip ? "mip" : "slab-average";
}

RenderMode parse_render_mode(const std::string& text) {
  if (text == "mip") return RenderMode::kMip;
  if (text == "slab-average") return RenderMode::kSlabAverage;
  throw ConfigError("unknown render mode '" + text + "' (expected mip or slab-average)");
}

std::uint8_t window_value(double value, double center, double width) {
  if (!(width > 0.0)) throw ConfigError("window width must be positive");
  const double t = (value - (center - 0.5 * width)) / width * 255.0;
  return static_cast<std::uint8_t>(std::clamp(std::round(t), 0.0, 255.0));
}

Image render_view(const ScalarVolume& values, const LabelVolume& mask, double window_center,
                  double window_width, RenderMode mode) {
  if (!(window_width > 0.0)) throw ConfigError("window width must be positive");
  if (values.empty() || !(values.dims() == mask.dims())) {
    throw Error("render: volume and mask must be nonempty and the same size");
  }
  const GridDims& g = values.dims();
  Image img;
  img.width = g.nx;
  img.height = g.ny;
  img.pixels.assign(static_cast<std::size_t>(g.nx) * g.ny, 0);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      double acc = mode == RenderMode::kMip ? -std::numeric_limits<double>::infinity() : 0.0;
      int n = 0;
      for (int k = g.nz - 1; k >= 0; --k) {
        if (!mask.at(i, j, k)) continue;
        const double v = values.at(i, j, k);
        acc = mode == RenderMode::kMip ? std::max(acc, v) : acc + v;
        ++n;
      }
      if (n == 0) continue;
      if (mode == RenderMode::kSlabAverage) acc /= n;
      img.pixels[static_cast<std::size_t>(j) * g.nx + i] =
          window_value(acc, window_center, window_width);
    }
  }
  return img;
}

void write_pgm(const Image& image, std::ostream& out) {
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
}

void write_pgm(const Image& image, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  write_pgm(image, f);
  if (!f) throw Error("failed writing '" + path + "'");
}

}  // namespace vufold
