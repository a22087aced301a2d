#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vufold/volume.hpp"

namespace vufold {

enum class TubeShape { kStraight, kJTube };

std::string to_string(TubeShape shape);
TubeShape parse_tube_shape(const std::string& text);

struct PhantomSpec {
  TubeShape shape = TubeShape::kStraight;
  double radius = 20.0;       // outer tube radius R, mm
  double wall = 4.0;          // wall thickness w, mm
  double length = 100.0;      // straight section length L, mm
  double bend_radius = 0.0;   // axis radius of the quarter bend; 0 selects 2R
  Vec3 spacing = Vec3::Ones();
  // Optional fixed grid; the tube plus a 5-voxel margin must fit inside it.
  std::optional<GridDims> grid;
};

// Ground truth carried alongside a generated phantom.
struct PhantomTruth {
  TubeShape shape = TubeShape::kStraight;
  std::vector<Vec3> axis;     // dense analytic centerline, cardia to pylorus
  double radius = 0.0;
  double wall = 0.0;
  double axis_length = 0.0;
  Vec3 cardia = Vec3::Zero();
  Vec3 pylorus = Vec3::Zero();
  // Points on the inner wall along the outer side of the tube (the greater
  // curvature analogue); for the straight tube the side is arbitrary (-x).
  std::vector<Vec3> ridge;
  // Bend description for the j-tube; unused for the straight tube.
  Vec3 bend_center = Vec3::Zero();
  double bend_radius = 0.0;
  Vec3 bend_normal = Vec3::UnitY();

  double inner_radius() const { return radius - wall; }
  // Distance from p to the closest analytic axis point.
  double distance_to_axis(const Vec3& p) const;
};

struct Phantom {
  ScalarVolume scalar;
  LabelVolume labels;
  PhantomTruth truth;
};

inline constexpr std::int16_t kLumenValue = -1000;
inline constexpr std::int16_t kWallValue = 40;

// Capped tube phantom: lumen (distance to axis < R - w) is label 2, the wall
// shell and the two end caps (thickness w) are label 1.
Phantom generate_phantom(const PhantomSpec& spec);

}  // namespace vufold
