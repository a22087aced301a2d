#include "vufold/phantom.hpp"

#include <algorithm>
#include <limits>
#include <numbers>

namespace vufold {

namespace {

constexpr int kMargin = 5;

// Analytic description of the tube axis relative to the axis start point.
struct TubeGeometry {
  TubeShape shape;
  double length;
  double bend_radius;
  double cap;  // axial extension of the outer surface at each end

  // Returns the radial distance from p to the axis piece whose parameter range
  // contains p's projection, or +inf. `extend_caps` lengthens the end pieces
  // by the cap thickness.
  double radial_distance(const Vec3& p, bool extend_caps) const {
    const double ext = extend_caps ? cap : 0.0;
    double best = std::numeric_limits<double>::infinity();
    // Straight section along +z.
    const double z_end = shape == TubeShape::kStraight ? length + ext : length;
    if (p.z() >= -ext && p.z() <= z_end) {
      best = std::min(best, std::hypot(p.x(), p.y()));
    }
    if (shape == TubeShape::kJTube) {
      // Quarter bend in the xz-plane toward +x around (Rb, 0, L).
      const Vec3 q = p - Vec3(bend_radius, 0.0, length);
      if (q.z() >= 0.0 && q.x() <= 0.0) {
        const double rho = std::hypot(q.x(), q.z());
        best = std::min(best, std::hypot(rho - bend_radius, p.y()));
      }
      // Exit section continues along +x from the bend end (Rb, 0, L + Rb).
      const Vec3 e = p - Vec3(bend_radius, 0.0, length + bend_radius);
      if (e.x() >= 0.0 && e.x() <= ext) best = std::min(best, std::hypot(e.y(), e.z()));
    }
    return best;
  }

  double axis_length() const {
    return shape == TubeShape::kStraight ? length
                                         : length + 0.5 * std::numbers::pi * bend_radius;
  }

  // Axis point and outward unit direction at arc length s.
  std::pair<Vec3, Vec3> axis_at(double s) const {
    if (s <= length || shape == TubeShape::kStraight) {
      return {Vec3(0.0, 0.0, s), -Vec3::UnitX()};
    }
    const double theta = (s - length) / bend_radius;
    const Vec3 center(bend_radius, 0.0, length);
    const Vec3 radial(-std::cos(theta), 0.0, std::sin(theta));
    return {center + bend_radius * radial, radial};
  }
};

}  // namespace

std::string to_string(TubeShape shape) {
  return shape == TubeShape::kStraight ? "straight" : "j-tube";
}

TubeShape parse_tube_shape(const std::string& text) {
  if (text == "straight" || text == "straight-tube") return TubeShape::kStraight;
  if (text == "j" || text == "j-tube" || text == "jtube") return TubeShape::kJTube;
  throw ConfigError("unknown phantom shape '" + text + "'");
}

double PhantomTruth::distance_to_axis(const Vec3& p) const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < axis.size(); ++i) {
    const Vec3 a = axis[i];
    const Vec3 ab = axis[i + 1] - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, (a + t * ab - p).norm());
  }
  if (axis.size() == 1) best = (axis.front() - p).norm();
  return best;
}

Phantom generate_phantom(const PhantomSpec& spec) {
  if (!(spec.wall > 0.0) || !(spec.radius > spec.wall)) {
    throw ConfigError("phantom requires R > w > 0");
  }
  if (!(spec.length > 0.0)) throw ConfigError("phantom length must be positive");
  for (int a = 0; a < 3; ++a) {
    if (!(spec.spacing[a] > 0.0) || !std::isfinite(spec.spacing[a])) {
      throw ConfigError("phantom spacing must be positive");
    }
  }
  const double bend = spec.bend_radius > 0.0 ? spec.bend_radius : 2.0 * spec.radius;
  if (spec.shape == TubeShape::kJTube && bend <= spec.radius) {
    throw ConfigError("j-tube bend radius must exceed the tube radius");
  }
  const TubeGeometry geom{spec.shape, spec.length, bend, spec.wall};

  // Bounding box of the outer surface relative to the axis start.
  Vec3 lo(-spec.radius, -spec.radius, -spec.wall);
  Vec3 hi(spec.radius, spec.radius, spec.length + spec.wall);
  if (spec.shape == TubeShape::kJTube) {
    hi.x() = bend + spec.wall;
    hi.z() = spec.length + bend + spec.radius;
  }

  // Axis start sits on a voxel center with a margin of at least 5 voxels.
  Vec3 start;
  GridDims dims;
  std::array<int, 3> n{};
  for (int a = 0; a < 3; ++a) {
    const double s = spec.spacing[a];
    const int below = static_cast<int>(std::ceil(-lo[a] / s - 1e-9)) + kMargin;
    const int above = static_cast<int>(std::ceil(hi[a] / s - 1e-9)) + kMargin;
    start[a] = below * s;
    n[a] = below + above + 1;
  }
  dims = {n[0], n[1], n[2]};
  if (spec.grid) {
    if (spec.grid->nx < dims.nx || spec.grid->ny < dims.ny || spec.grid->nz < dims.nz) {
      throw ConfigError("tube does not fit the requested grid");
    }
    dims = *spec.grid;
  }
  constexpr std::size_t kMaxVoxels = std::size_t{1} << 28;
  if (dims.count() > kMaxVoxels) throw ConfigError("tube does not fit the grid: too many voxels");

  Phantom out;
  out.scalar = ScalarVolume(dims, spec.spacing, kBackgroundValue);
  out.labels = LabelVolume(dims, spec.spacing, label::kBackground);
  const double inner = spec.radius - spec.wall;
  for (int k = 0; k < dims.nz; ++k) {
    for (int j = 0; j < dims.ny; ++j) {
      for (int i = 0; i < dims.nx; ++i) {
        const Vec3 p = out.labels.world(i, j, k) - start;
        if (geom.radial_distance(p, false) < inner) {
          out.labels.at(i, j, k) = label::kAir;
          out.scalar.at(i, j, k) = kLumenValue;
        } else if (geom.radial_distance(p, true) <= spec.radius) {
          out.labels.at(i, j, k) = label::kWall;
          out.scalar.at(i, j, k) = kWallValue;
        }
      }
    }
  }

  PhantomTruth& t = out.truth;
  t.shape = spec.shape;
  t.radius = spec.radius;
  t.wall = spec.wall;
  t.axis_length = geom.axis_length();
  const double step = 0.5 * spec.spacing.minCoeff();
  const int samples = std::max(2, static_cast<int>(std::ceil(t.axis_length / step)) + 1);
  for (int s = 0; s < samples; ++s) {
    const double arc = t.axis_length * s / (samples - 1);
    const auto [point, outward] = geom.axis_at(arc);
    t.axis.push_back(start + point);
    t.ridge.push_back(start + point + inner * outward);
  }
  t.cardia = t.axis.front();
  t.pylorus = t.axis.back();
  if (spec.shape == TubeShape::kJTube) {
    t.bend_center = start + Vec3(bend, 0.0, spec.length);
    t.bend_radius = bend;
    t.bend_normal = Vec3::UnitY();
  }
  return out;
}

}  // namespace vufold
