#pragma once

#include <span>
#include <string>
#include <vector>

#include "vufold/preprocess.hpp"
#include "vufold/wall_model.hpp"

namespace vufold {

struct UnfoldPlane {
  Vec3 normal = Vec3::UnitZ();  // n_Omega
  Vec3 point = Vec3::Zero();    // b_Omega
  Vec3 v1 = Vec3::UnitX();      // base line direction
  Vec3 v2 = Vec3::UnitY();      // in-plane perpendicular

  double signed_distance(const Vec3& p) const { return (p - point).dot(normal); }
  Vec3 project(const Vec3& p) const { return p - signed_distance(p) * normal; }
};

// How the principal axis of the projected incision is signed.
//  kReverse: v1 = +v1' when v1'.(u'_J - u'_1) < 0, otherwise -v1', so v1 points from u'_J toward u'_1.
//  kForward: v1 points from u'_1 toward u'_J.
enum class BaselineOrientation { kReverse, kForward };

std::string to_string(BaselineOrientation o);
BaselineOrientation parse_baseline_orientation(const std::string& text);

// Stomach radius at a cut-edge vertex.
struct VertexRadius {
  int vertex = 0;
  double radius = 0.0;       // epsilon
  int incision_index = 0;    // j', 0-based
  int centerline_index = 0;  // k', 0-based
};

struct BaseLine {
  std::vector<Vec3> projected;  // u'_j
  std::vector<Vec3> points;     // p_j
  Vec3 v1 = Vec3::UnitX();
  Vec3 v2 = Vec3::UnitY();
  bool rank_deficient = false;  // v2 came from the fallback
};

enum class FlapSide { kPlus, kMinus };

struct Destination {
  int vertex = 0;
  double radius = 0.0;
  int incision_index = 0;
  int centerline_index = 0;
  FlapSide side = FlapSide::kPlus;
  Vec3 target = Vec3::Zero();  // g_i'
};

struct DestinationSet {
  std::vector<Destination> entries;
};

// Normal from the incision chord toward its middle point; anchor at the inner
// surface vertex farthest along the normal (lowest index on ties).
UnfoldPlane compute_unfold_plane(std::span<const Vec3> incision, std::span<const Vec3> rest,
                                 std::span<const int> inner_vertices);
UnfoldPlane compute_unfold_plane(const IncisionLine& incision, const WallModel& model);

// For each cut-edge vertex: nearest incision point j', the centerline point
// nearest to u_j', and radius |c_k' - u_j'|. Index order breaks ties.
std::vector<VertexRadius> compute_radii(std::span<const Vec3> centerline,
                                        std::span<const Vec3> incision,
                                        std::span<const Vec3> rest,
                                        std::span<const int> boundary_vertices);
std::vector<VertexRadius> compute_radii(const Centerline& centerline, const IncisionLine& incision,
                                        const WallModel& model);

// Projects the incision on the plane, orients its principal axes and lays out
// the arc-length-preserving base line around u'_{J/2}. Also fills plane.v1/v2.
BaseLine compute_base_line(std::span<const Vec3> incision, UnfoldPlane& plane,
                           BaselineOrientation orientation = BaselineOrientation::kReverse);

// Places each cut-edge vertex pi*epsilon away from the base line, on the side
// given by the triple-product test.
DestinationSet compute_destinations(std::span<const VertexRadius> radii, const BaseLine& base,
                                    std::span<const Vec3> centerline,
                                    std::span<const Vec3> incision, std::span<const Vec3> rest);

// e_i' = g_i' - r_i' for every destination entry, in entry order.
std::vector<Vec3> force_directions(std::span<const Vec3> positions, const DestinationSet& dest);

// Mean distance of the cut-edge vertices to their destinations.
double unfold_metric(std::span<const Vec3> positions, const DestinationSet& dest);

struct UnfoldGeometry {
  UnfoldPlane plane;
  BaseLine base;
  std::vector<VertexRadius> radii;
  DestinationSet destinations;
};

UnfoldGeometry compute_unfold_geometry(const Centerline& centerline, const IncisionLine& incision,
                                       const WallModel& model, BaselineOrientation orientation);

// Line-oriented dump for plotting: plane, base line points, destinations.
void write_geometry_dump(const UnfoldGeometry& geometry, std::ostream& out);

}  // namespace vufold
