#include "vufold/unfold_geometry.hpp"

#include <limits>
#include <numbers>
#include <ostream>

#include <Eigen/Eigenvalues>

namespace vufold {

namespace {

std::size_t argmin_distance(std::span<const Vec3> pts, const Vec3& p) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = (pts[i] - p).norm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace

std::string to_string(BaselineOrientation o) {
  return o == BaselineOrientation::kReverse ? "reverse" : "forward";
}

BaselineOrientation parse_baseline_orientation(const std::string& text) {
  if (text == "reverse") return BaselineOrientation::kReverse;
  if (text == "forward") return BaselineOrientation::kForward;
  throw ConfigError("baseline_orientation must be 'reverse' or 'forward', got '" + text + "'");
}

UnfoldPlane compute_unfold_plane(std::span<const Vec3> incision, std::span<const Vec3> rest,
                                 std::span<const int> inner_vertices) {
  if (incision.size() < 2) throw Error("degenerate incision: fewer than two points");
  if (inner_vertices.empty()) throw Error("unfold plane: inner surface vertex set is empty");
  const Vec3& first = incision.front();
  const Vec3& last = incision.back();
  const Vec3& mid = incision[incision.size() / 2 - 1];
  const Vec3 chord = last - first;
  const double chord2 = chord.squaredNorm();
  if (chord2 < 1e-18) throw Error("degenerate incision: first and last points coincide");
  // Foot of the perpendicular from the middle point, kept on the segment.
  const double t = std::clamp((mid - first).dot(chord) / chord2, 0.0, 1.0);
  const Vec3 foot = first + t * chord;
  const Vec3 offset = mid - foot;
  const double len = offset.norm();
  if (len <= 1e-6) throw Error("degenerate incision: middle point lies on the end-point chord");

  UnfoldPlane plane;
  plane.normal = offset / len;
  int anchor = -1;
  double best = -std::numeric_limits<double>::infinity();
  for (int v : inner_vertices) {
    const double h = rest[v].dot(plane.normal);
    if (h > best || (h == best && v < anchor)) {
      best = h;
      anchor = v;
    }
  }
  plane.point = rest[anchor];
  return plane;
}

UnfoldPlane compute_unfold_plane(const IncisionLine& incision, const WallModel& model) {
  return compute_unfold_plane(incision.points, model.rest, model.sets.inner);
}

std::vector<VertexRadius> compute_radii(std::span<const Vec3> centerline,
                                        std::span<const Vec3> incision,
                                        std::span<const Vec3> rest,
                                        std::span<const int> boundary_vertices) {
  if (centerline.empty() || incision.empty()) {
    throw Error("radii: centerline and incision must be nonempty");
  }
  if (boundary_vertices.empty()) throw Error("radii: cut-edge vertex set is empty");
  // Nearest centerline point per incision point.
  std::vector<int> nearest_c(incision.size());
  for (std::size_t j = 0; j < incision.size(); ++j) {
    nearest_c[j] = static_cast<int>(argmin_distance(centerline, incision[j]));
  }
  std::vector<VertexRadius> out;
  out.reserve(boundary_vertices.size());
  for (int v : boundary_vertices) {
    VertexRadius r;
    r.vertex = v;
    r.incision_index = static_cast<int>(argmin_distance(incision, rest[v]));
    r.centerline_index = nearest_c[r.incision_index];
    r.radius = (centerline[r.centerline_index] - incision[r.incision_index]).norm();
    out.push_back(r);
  }
  return out;
}

std::vector<VertexRadius> compute_radii(const Centerline& centerline, const IncisionLine& incision,
                                        const WallModel& model) {
  return compute_radii(centerline.points, incision.points, model.rest, model.sets.boundary);
}

BaseLine compute_base_line(std::span<const Vec3> incision, UnfoldPlane& plane,
                           BaselineOrientation orientation) {
  const std::size_t count = incision.size();
  if (count < 2) throw Error("base line: need at least two incision points");
  BaseLine base;
  base.projected.reserve(count);
  for (const Vec3& u : incision) base.projected.push_back(plane.project(u));

  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : base.projected) mean += p;
  mean /= static_cast<double>(count);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const Vec3& p : base.projected) cov += (p - mean) * (p - mean).transpose();
  cov /= static_cast<double>(count);

  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Eigen::Vector3d lambda = eig.eigenvalues();  // ascending
  if (!(lambda(2) > 1e-18)) throw Error("base line: projected incision points coincide");
  const Vec3& n = plane.normal;

  Vec3 first = eig.eigenvectors().col(2);
  first -= first.dot(n) * n;
  first.normalize();

  const Vec3 spread = base.projected.back() - base.projected.front();
  const double along = first.dot(spread);
  Vec3 v1;
  if (orientation == BaselineOrientation::kReverse) {
    v1 = along < 0.0 ? first : Vec3(-first);
  } else {
    v1 = along >= 0.0 ? first : Vec3(-first);
  }

  Vec3 second = eig.eigenvectors().col(1);
  second -= second.dot(n) * n + second.dot(v1) * v1;
  if (lambda(1) <= 1e-12 * lambda(2) || second.norm() < 1e-6) {
    base.rank_deficient = true;
    second = n.cross(v1);
  }
  second.normalize();
  const Vec3 v2 = second.cross(v1).dot(n) < 0.0 ? second : Vec3(-second);

  base.v1 = v1;
  base.v2 = v2;
  plane.v1 = v1;
  plane.v2 = v2;

  const std::size_t m = count / 2 - 1;
  base.points.assign(count, Vec3::Zero());
  base.points[m] = base.projected[m];
  for (std::size_t i = m; i-- > 0;) {
    base.points[i] = base.points[i + 1] - v1 * (base.projected[i + 1] - base.projected[i]).norm();
  }
  for (std::size_t i = m + 1; i < count; ++i) {
    base.points[i] = base.points[i - 1] + v1 * (base.projected[i] - base.projected[i - 1]).norm();
  }
  return base;
}

DestinationSet compute_destinations(std::span<const VertexRadius> radii, const BaseLine& base,
                                    std::span<const Vec3> centerline,
                                    std::span<const Vec3> incision, std::span<const Vec3> rest) {
  if (incision.size() < 2) throw Error("destinations: need at least two incision points");
  if (base.points.size() != incision.size()) {
    throw Error("destinations: base line and incision differ in length");
  }
  DestinationSet out;
  out.entries.reserve(radii.size());
  for (const VertexRadius& r : radii) {
    const std::size_t j = static_cast<std::size_t>(r.incision_index);
    const Vec3& u = incision[j];
    const Vec3& c = centerline[r.centerline_index];
    const Vec3 heading = j == 0 ? Vec3(incision[1] - incision[0]) : Vec3(u - incision[j - 1]);
    const double side = (u - c).cross(rest[r.vertex] - c).dot(heading);

    Destination d;
    d.vertex = r.vertex;
    d.radius = r.radius;
    d.incision_index = r.incision_index;
    d.centerline_index = r.centerline_index;
    d.side = side >= 0.0 ? FlapSide::kPlus : FlapSide::kMinus;
    const double sign = d.side == FlapSide::kPlus ? 1.0 : -1.0;
    d.target = base.points[j] + sign * std::numbers::pi * r.radius * base.v2;
    out.entries.push_back(d);
  }
  return out;
}

std::vector<Vec3> force_directions(std::span<const Vec3> positions, const DestinationSet& dest) {
  std::vector<Vec3> out;
  out.reserve(dest.entries.size());
  for (const auto& e : dest.entries) out.push_back(e.target - positions[e.vertex]);
  return out;
}

double unfold_metric(std::span<const Vec3> positions, const DestinationSet& dest) {
  if (dest.entries.empty()) throw Error("unfold metric: cut-edge vertex set is empty");
  double sum = 0.0;
  for (const auto& e : dest.entries) sum += (positions[e.vertex] - e.target).norm();
  return sum / static_cast<double>(dest.entries.size());
}

UnfoldGeometry compute_unfold_geometry(const Centerline& centerline, const IncisionLine& incision,
                                       const WallModel& model, BaselineOrientation orientation) {
  UnfoldGeometry g;
  g.plane = compute_unfold_plane(incision, model);
  g.radii = compute_radii(centerline, incision, model);
  g.base = compute_base_line(incision.points, g.plane, orientation);
  g.destinations =
      compute_destinations(g.radii, g.base, centerline.points, incision.points, model.rest);
  return g;
}

void write_geometry_dump(const UnfoldGeometry& g, std::ostream& out) {
  const auto precision = out.precision(17);
  auto vec = [&](const Vec3& v) { out << ' ' << v.x() << ' ' << v.y() << ' ' << v.z(); };
  out << "plane";
  vec(g.plane.normal);
  vec(g.plane.point);
  out << "\naxes";
  vec(g.plane.v1);
  vec(g.plane.v2);
  out << '\n';
  for (std::size_t j = 0; j < g.base.points.size(); ++j) {
    out << "p " << j;
    vec(g.base.points[j]);
    out << '\n';
  }
  for (const auto& d : g.destinations.entries) {
    out << "g " << d.vertex << ' ' << d.radius << ' ' << d.incision_index << ' '
        << (d.side == FlapSide::kPlus ? '+' : '-');
    vec(d.target);
    out << '\n';
  }
  out.precision(precision);
}

}  // namespace vufold
