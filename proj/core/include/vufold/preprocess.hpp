#pragma once

#include <cstdint>
#include <vector>

#include "vufold/volume.hpp"

namespace vufold {

struct PreprocessParams {
  double air_threshold = -700.0;   // lumen voxels have intensity <= this
  double wall_threshold = -500.0;  // wall voxels have intensity > this
  double wall_shell_mm = 4.0;      // geodesic shell thickness grown from the lumen
  double resample_step_mm = 2.0;   // centerline and incision point spacing
  double landmark_snap_mm = 5.0;   // landmarks may sit this far outside the lumen
  double section_half_width_mm = 1.5;
  int centerline_smoothing_passes = 5;
  int incision_smoothing_passes = 3;
  // Ridge picks within this distance of the farthest candidate prefer
  // continuity with the previous cross-section.
  double ridge_tolerance_mm = 0.5;

  void validate() const;
};

// Ordered cardia -> pylorus, world mm.
struct Centerline {
  std::vector<Vec3> points;
};

// Ordered cardia -> pylorus on the inner wall surface; size is even.
struct IncisionLine {
  std::vector<Vec3> points;
};

// Raw minimal-cost voxel path through the lumen.
struct VoxelPath {
  std::vector<std::size_t> voxels;  // linear indices, start to goal
  double cost = 0.0;
};

// 6-connected component of voxels at or below the air threshold containing
// the seed, closed with a radius-1 ball. Result holds label 2 on the region.
LabelVolume extract_air_region(const ScalarVolume& scalar, const Vec3& seed,
                               const PreprocessParams& params = {});

// Voxels above the wall threshold within the geodesic shell grown outward
// from the lumen boundary. Result holds label 1 on the region.
LabelVolume extract_wall_region(const ScalarVolume& scalar, const LabelVolume& air,
                                const PreprocessParams& params = {});

// Nearest lumen voxel to p within `max_mm`; throws when there is none.
Index3 snap_to_air(const LabelVolume& air, const Vec3& p, double max_mm, const char* what);

// Dijkstra over the 26-neighborhood of the lumen with step cost
// length / (1 + DT(destination)). Ties break on the lower linear index.
VoxelPath minimal_air_path(const LabelVolume& air, const Volume<double>& distance,
                           const Index3& from, const Index3& to);

Centerline extract_centerline(const LabelVolume& air, const Vec3& cardia, const Vec3& pylorus,
                              const PreprocessParams& params = {});

// Greater-curvature ridge substitute: per centerline cross-section, the inner
// surface voxel farthest from the centerline point.
IncisionLine determine_incision_line(const LabelVolume& wall, const LabelVolume& air,
                                     const Centerline& centerline, const Vec3& cardia,
                                     const Vec3& pylorus, const PreprocessParams& params = {});

// Wall voxels 6-adjacent to the lumen, as linear indices in ascending order.
std::vector<std::size_t> inner_surface_voxels(const LabelVolume& wall, const LabelVolume& air);

// Polyline helpers shared by the preprocessing and geometry stages.
std::vector<Vec3> smooth_polyline(std::vector<Vec3> points, int passes);
std::vector<Vec3> resample_polyline(const std::vector<Vec3>& points, double step);
double polyline_length(const std::vector<Vec3>& points);
double distance_to_polyline(const std::vector<Vec3>& points, const Vec3& p);

}  // namespace vufold
