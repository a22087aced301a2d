#include "vufold/preprocess.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <string>

#include "vufold/distance_transform.hpp"

namespace vufold {

namespace {

// Centerline points closer than this to the centroid axis give no convex side.
constexpr double kConvexMinMm = 2.0;

using HeapEntry = std::pair<double, std::size_t>;
using MinHeap = std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<>>;

template <typename T>
bool same_grid(const Volume<T>& a, const LabelVolume& b) {
  return a.dims() == b.dims() && a.spacing() == b.spacing();
}

double step_length(const std::array<int, 3>& off, const Vec3& spacing) {
  return Vec3(off[0] * spacing.x(), off[1] * spacing.y(), off[2] * spacing.z()).norm();
}

// Morphological closing with the 6-neighborhood ball.
std::vector<std::uint8_t> close_ball1(const std::vector<std::uint8_t>& in, const LabelVolume& grid) {
  const GridDims& d = grid.dims();
  std::vector<std::uint8_t> dilated(in);
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) {
        const std::size_t idx = grid.index(i, j, k);
        if (in[idx]) continue;
        for (const auto& o : kFaceNeighbors) {
          const int a = i + o[0], b = j + o[1], c = k + o[2];
          if (grid.contains(a, b, c) && in[grid.index(a, b, c)]) {
            dilated[idx] = 1;
            break;
          }
        }
      }
  std::vector<std::uint8_t> closed(dilated);
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) {
        const std::size_t idx = grid.index(i, j, k);
        if (!dilated[idx]) continue;
        for (const auto& o : kFaceNeighbors) {
          const int a = i + o[0], b = j + o[1], c = k + o[2];
          if (grid.contains(a, b, c) && !dilated[grid.index(a, b, c)]) {
            closed[idx] = 0;
            break;
          }
        }
      }
  return closed;
}

Vec3 tangent_at(const std::vector<Vec3>& pts, std::size_t k) {
  const std::size_t lo = k == 0 ? 0 : k - 1;
  const std::size_t hi = std::min(k + 1, pts.size() - 1);
  Vec3 t = pts[hi] - pts[lo];
  const double n = t.norm();
  return n > 0.0 ? Vec3(t / n) : Vec3::UnitZ();
}

std::size_t nearest_point_index(const std::vector<Vec3>& pts, const Vec3& p) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = (pts[i] - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::vector<Vec3> drop_consecutive_duplicates(const std::vector<Vec3>& pts) {
  std::vector<Vec3> out;
  for (const Vec3& p : pts) {
    if (out.empty() || (out.back() - p).norm() > 1e-12) out.push_back(p);
  }
  return out;
}

}  // namespace

void PreprocessParams::validate() const {
  if (!(wall_threshold > air_threshold)) {
    throw ConfigError("wall_threshold must exceed air_threshold");
  }
  if (!(resample_step_mm > 0.0)) throw ConfigError("resample_step_mm must be positive");
  if (!(landmark_snap_mm >= 0.0)) throw ConfigError("landmark_snap_mm must be non-negative");
  if (!(section_half_width_mm > 0.0)) throw ConfigError("section_half_width_mm must be positive");
  if (centerline_smoothing_passes < 0 || incision_smoothing_passes < 0) {
    throw ConfigError("smoothing passes must be non-negative");
  }
  if (!(ridge_tolerance_mm >= 0.0)) throw ConfigError("ridge_tolerance_mm must be non-negative");
}

LabelVolume extract_air_region(const ScalarVolume& scalar, const Vec3& seed,
                               const PreprocessParams& params) {
  const Index3 s = scalar.nearest_voxel(seed);
  if (!scalar.contains(s) || scalar.at(s) > params.air_threshold) {
    throw Error("seed is not in an air-like voxel");
  }
  LabelVolume grid(scalar.dims(), scalar.spacing(), label::kBackground);
  std::vector<std::uint8_t> region(scalar.dims().count(), 0);
  std::vector<std::size_t> stack{scalar.index(s)};
  region[stack.front()] = 1;
  while (!stack.empty()) {
    const Index3 v = scalar.unravel(stack.back());
    stack.pop_back();
    for (const auto& o : kFaceNeighbors) {
      const Index3 n{v.i + o[0], v.j + o[1], v.k + o[2]};
      if (!scalar.contains(n)) continue;
      const std::size_t idx = scalar.index(n);
      if (region[idx] || scalar.at(n) > params.air_threshold) continue;
      region[idx] = 1;
      stack.push_back(idx);
    }
  }
  const auto closed = close_ball1(region, grid);
  auto out = grid.data();
  for (std::size_t i = 0; i < closed.size(); ++i) {
    if (closed[i]) out[i] = label::kAir;
  }
  return grid;
}

LabelVolume extract_wall_region(const ScalarVolume& scalar, const LabelVolume& air,
                                const PreprocessParams& params) {
  if (!same_grid(scalar, air)) throw ConfigError("scalar and air volumes differ in geometry");
  if (count_label(air, label::kAir) == 0) throw Error("air region is empty");
  if (!(params.wall_shell_mm > 0.0)) {
    throw Error("empty wall: shell thickness must be positive");
  }
  const GridDims& d = scalar.dims();
  std::vector<double> dist(d.count(), std::numeric_limits<double>::infinity());
  MinHeap heap;
  auto eligible = [&](const Index3& v) {
    return scalar.contains(v) && air.at(v) != label::kAir && scalar.at(v) > params.wall_threshold;
  };
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) {
        if (!eligible({i, j, k})) continue;
        for (const auto& o : kFaceNeighbors) {
          const Index3 n{i + o[0], j + o[1], k + o[2]};
          if (air.contains(n) && air.at(n) == label::kAir) {
            const std::size_t idx = scalar.index(i, j, k);
            dist[idx] = 0.0;
            heap.emplace(0.0, idx);
            break;
          }
        }
      }
  const double limit = params.wall_shell_mm + 1e-9;
  while (!heap.empty()) {
    const auto [dv, idx] = heap.top();
    heap.pop();
    if (dv > dist[idx]) continue;
    const Index3 v = scalar.unravel(idx);
    for (const auto& o : full_neighborhood()) {
      const Index3 n{v.i + o[0], v.j + o[1], v.k + o[2]};
      if (!eligible(n)) continue;
      const double nd = dv + step_length(o, scalar.spacing());
      if (nd > limit) continue;
      const std::size_t nidx = scalar.index(n);
      if (nd < dist[nidx]) {
        dist[nidx] = nd;
        heap.emplace(nd, nidx);
      }
    }
  }
  LabelVolume wall(d, scalar.spacing(), label::kBackground);
  auto out = wall.data();
  std::size_t count = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] <= limit) {
      out[i] = label::kWall;
      ++count;
    }
  }
  if (count == 0) throw Error("empty wall: no voxels above the wall threshold border the lumen");
  return wall;
}

Index3 snap_to_air(const LabelVolume& air, const Vec3& p, double max_mm, const char* what) {
  const Vec3& sp = air.spacing();
  const Index3 c = air.nearest_voxel(p);
  std::array<int, 3> reach{};
  for (int a = 0; a < 3; ++a) reach[a] = static_cast<int>(std::ceil(max_mm / sp[a])) + 1;
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_idx = std::numeric_limits<std::size_t>::max();
  for (int k = c.k - reach[2]; k <= c.k + reach[2]; ++k)
    for (int j = c.j - reach[1]; j <= c.j + reach[1]; ++j)
      for (int i = c.i - reach[0]; i <= c.i + reach[0]; ++i) {
        if (!air.contains(i, j, k) || air.at(i, j, k) != label::kAir) continue;
        const double dd = (air.world(i, j, k) - p).norm();
        const std::size_t idx = air.index(i, j, k);
        if (dd <= max_mm + 1e-9 && (dd < best || (dd == best && idx < best_idx))) {
          best = dd;
          best_idx = idx;
        }
      }
  if (best_idx == std::numeric_limits<std::size_t>::max()) {
    throw Error(std::string("unreachable: ") + what + " is not within " +
                std::to_string(max_mm) + " mm of the air region");
  }
  return air.unravel(best_idx);
}

VoxelPath minimal_air_path(const LabelVolume& air, const Volume<double>& distance,
                           const Index3& from, const Index3& to) {
  const std::size_t n = air.dims().count();
  const std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<double> cost(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> prev(n, none);
  const std::size_t start = air.index(from);
  const std::size_t goal = air.index(to);
  cost[start] = 0.0;
  MinHeap heap;
  heap.emplace(0.0, start);
  while (!heap.empty()) {
    const auto [cv, idx] = heap.top();
    heap.pop();
    if (cv > cost[idx]) continue;
    if (idx == goal) break;
    const Index3 v = air.unravel(idx);
    for (const auto& o : full_neighborhood()) {
      const Index3 nb{v.i + o[0], v.j + o[1], v.k + o[2]};
      if (!air.contains(nb) || air.at(nb) != label::kAir) continue;
      const std::size_t nidx = air.index(nb);
      const double nc = cv + step_length(o, air.spacing()) / (1.0 + distance.at(nb));
      if (nc < cost[nidx] || (nc == cost[nidx] && idx < prev[nidx])) {
        cost[nidx] = nc;
        prev[nidx] = idx;
        heap.emplace(nc, nidx);
      }
    }
  }
  if (!std::isfinite(cost[goal])) {
    throw Error("unreachable: cardia and pylorus are not connected through the air region");
  }
  VoxelPath path;
  path.cost = cost[goal];
  for (std::size_t at = goal; at != none; at = prev[at]) path.voxels.push_back(at);
  std::reverse(path.voxels.begin(), path.voxels.end());
  return path;
}

Centerline extract_centerline(const LabelVolume& air, const Vec3& cardia, const Vec3& pylorus,
                              const PreprocessParams& params) {
  params.validate();
  const Index3 from = snap_to_air(air, cardia, params.landmark_snap_mm, "cardia");
  const Index3 to = snap_to_air(air, pylorus, params.landmark_snap_mm, "pylorus");
  const auto mask = mask_of(air, label::kAir);
  const Volume<double> dt = euclidean_distance_transform(mask, air.dims(), air.spacing());
  const VoxelPath path = minimal_air_path(air, dt, from, to);

  std::vector<Vec3> pts;
  pts.reserve(path.voxels.size());
  for (std::size_t idx : path.voxels) pts.push_back(air.world(idx));
  if (pts.size() == 1) pts.push_back(pts.front());
  pts = smooth_polyline(std::move(pts), params.centerline_smoothing_passes);
  Centerline line;
  line.points = resample_polyline(pts, params.resample_step_mm);
  if (line.points.size() < 2) line.points = {pts.front(), pts.back()};
  return line;
}

std::vector<std::size_t> inner_surface_voxels(const LabelVolume& wall, const LabelVolume& air) {
  if (!(wall.dims() == air.dims())) throw ConfigError("wall and air volumes differ in geometry");
  std::vector<std::size_t> out;
  const GridDims& d = wall.dims();
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) {
        if (wall.at(i, j, k) != label::kWall) continue;
        for (const auto& o : kFaceNeighbors) {
          const Index3 n{i + o[0], j + o[1], k + o[2]};
          if (air.contains(n) && air.at(n) == label::kAir) {
            out.push_back(wall.index(i, j, k));
            break;
          }
        }
      }
  return out;
}

IncisionLine determine_incision_line(const LabelVolume& wall, const LabelVolume& air,
                                     const Centerline& centerline, const Vec3& cardia,
                                     const Vec3& pylorus, const PreprocessParams& params) {
  params.validate();
  const auto& c = centerline.points;
  if (c.size() < 2) throw Error("incision: centerline needs at least two points");
  const auto surface = inner_surface_voxels(wall, air);
  if (surface.empty()) throw Error("incision: no inner-surface voxels");

  std::vector<Vec3> surf_pts;
  std::vector<std::size_t> nearest_c;
  surf_pts.reserve(surface.size());
  nearest_c.reserve(surface.size());
  for (std::size_t idx : surface) {
    surf_pts.push_back(wall.world(idx));
    nearest_c.push_back(nearest_point_index(c, surf_pts.back()));
  }

  // Convex side of the centerline: away from its centroid, across the tangent.
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : c) centroid += p;
  centroid /= static_cast<double>(c.size());

  std::vector<Vec3> ridge;
  ridge.reserve(c.size());
  for (std::size_t k = 0; k < c.size(); ++k) {
    const Vec3 t = tangent_at(c, k);
    Vec3 convex = c[k] - centroid;
    convex -= convex.dot(t) * t;
    convex = convex.norm() > kConvexMinMm ? convex.normalized() : Vec3::Zero();
    std::vector<std::size_t> cand;
    double far = -1.0;
    for (std::size_t s = 0; s < surf_pts.size(); ++s) {
      const std::size_t nk = nearest_c[s];
      if ((nk > k ? nk - k : k - nk) > 2) continue;
      const Vec3 rel = surf_pts[s] - c[k];
      if (std::abs(rel.dot(t)) > params.section_half_width_mm) continue;
      cand.push_back(s);
      far = std::max(far, rel.norm());
    }
    if (cand.empty()) {
      throw Error("incision: cross-section " + std::to_string(k) +
                  " has no inner-surface voxel");
    }
    // Among the near-farthest candidates prefer the convex side; without one
    // keep the pick closest to the previous section. The first section of a
    // straight line takes the strict farthest. Index order breaks ties.
    const bool has_side = convex.squaredNorm() > 0.0;
    const double tol = ridge.empty() && !has_side ? 0.0 : params.ridge_tolerance_mm;
    std::size_t best = cand.front();
    double best_key = std::numeric_limits<double>::infinity();
    for (std::size_t s : cand) {
      const Vec3 rel = surf_pts[s] - c[k];
      const double dist = rel.norm();
      if (dist < far - tol - 1e-12) continue;
      const double key = has_side       ? -rel.dot(convex)
                         : ridge.empty() ? -dist
                                         : (surf_pts[s] - ridge.back()).norm();
      if (key < best_key) {
        best_key = key;
        best = s;
      }
    }
    ridge.push_back(surf_pts[best]);
  }

  ridge = drop_consecutive_duplicates(ridge);
  ridge = smooth_polyline(std::move(ridge), params.incision_smoothing_passes);

  const Vec3 start = surf_pts[nearest_point_index(surf_pts, cardia)];
  const Vec3 end = surf_pts[nearest_point_index(surf_pts, pylorus)];
  std::vector<Vec3> full;
  full.reserve(ridge.size() + 2);
  full.push_back(start);
  full.insert(full.end(), ridge.begin(), ridge.end());
  full.push_back(end);
  full = drop_consecutive_duplicates(full);

  std::vector<Vec3> resampled = resample_polyline(full, params.resample_step_mm);
  for (Vec3& p : resampled) p = surf_pts[nearest_point_index(surf_pts, p)];
  resampled.front() = start;
  resampled.back() = end;

  IncisionLine line;
  line.points = drop_consecutive_duplicates(resampled);
  if (line.points.size() % 2 == 1) line.points.pop_back();
  if (line.points.size() < 4) throw Error("incision: fewer than four incision points");
  return line;
}

std::vector<Vec3> smooth_polyline(std::vector<Vec3> points, int passes) {
  if (points.size() < 3) return points;
  std::vector<Vec3> next(points.size());
  for (int p = 0; p < passes; ++p) {
    next.front() = points.front();
    next.back() = points.back();
    for (std::size_t i = 1; i + 1 < points.size(); ++i) {
      next[i] = (points[i - 1] + points[i] + points[i + 1]) / 3.0;
    }
    points.swap(next);
  }
  return points;
}

std::vector<Vec3> resample_polyline(const std::vector<Vec3>& points, double step) {
  if (points.empty()) return {};
  if (!(step > 0.0)) throw ConfigError("resample step must be positive");
  std::vector<Vec3> out{points.front()};
  double carried = 0.0;  // arc length since the last emitted sample
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const Vec3 a = points[i];
    const Vec3 b = points[i + 1];
    const double seg = (b - a).norm();
    if (seg == 0.0) continue;
    double along = step - carried;
    while (along <= seg + 1e-12) {
      out.push_back(a + (b - a) * (std::min(along, seg) / seg));
      along += step;
    }
    carried = seg - (along - step);
  }
  if ((out.back() - points.back()).norm() > 1e-9 * std::max(1.0, step)) {
    out.push_back(points.back());
  }
  return out;
}

double polyline_length(const std::vector<Vec3>& points) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) total += (points[i + 1] - points[i]).norm();
  return total;
}

double distance_to_polyline(const std::vector<Vec3>& points, const Vec3& p) {
  if (points.empty()) return std::numeric_limits<double>::infinity();
  double best = (points.front() - p).norm();
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const Vec3 a = points[i];
    const Vec3 ab = points[i + 1] - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, (a + t * ab - p).norm());
  }
  return best;
}

}  // namespace vufold
