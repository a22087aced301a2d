#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "vufold/unfold_geometry.hpp"
#include "vufold/volume.hpp"
#include "vufold/wall_model.hpp"

namespace vufold {

// Output grid whose axes follow (v1, v2, n) of the unfolded plane. Voxel
// (i, j, k) sits at origin + i*s0*axis[0] + j*s1*axis[1] + k*s2*axis[2].
struct UnfoldedGrid {
  Vec3 origin = Vec3::Zero();
  std::array<Vec3, 3> axes{Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  GridDims dims{};
  Vec3 spacing = Vec3::Ones();

  Vec3 world(int i, int j, int k) const {
    return origin + i * spacing[0] * axes[0] + j * spacing[1] * axes[1] +
           k * spacing[2] * axes[2];
  }
  // Continuous grid coordinates of a world point.
  Vec3 to_grid(const Vec3& p) const;
};

struct DefectMetrics {
  double overlap_fraction = 0.0;  // masked-in voxels strictly inside 2+ hexahedra
  double broken_fraction = 0.0;   // masked-in voxels bordering an enclosed hole
  double bending_rms_mm = 0.0;    // hexahedron centroids against the plane
  std::size_t masked_voxels = 0;
  std::size_t degenerate_hexahedra = 0;
  std::size_t newton_failures = 0;
};

struct UnfoldedVolume {
  UnfoldedGrid grid;
  ScalarVolume values;  // kBackgroundValue where the mask is off
  LabelVolume mask;     // 1 inside the deformed model
  DefectMetrics metrics;
};

// Bounding box of the deformed vertices in plane coordinates, widened by
// margin_mm in-plane; the thickness axis spans the exact extent along n.
UnfoldedGrid build_unfolded_grid(const UnfoldPlane& plane, std::span<const Vec3> deformed,
                                 const Vec3& spacing, double margin_mm = 5.0);

// Corner order follows Hexahedron::vertices (bit0 +x, bit1 +y, bit2 +z).
using HexCorners = std::array<Vec3, 8>;

HexCorners hex_corners(const Hexahedron& hex, std::span<const Vec3> positions);
Vec3 trilinear_map(const HexCorners& c, const Vec3& xi);
Eigen::Matrix3d trilinear_jacobian(const HexCorners& c, const Vec3& xi);

struct InverseResult {
  Vec3 xi = Vec3::Constant(0.5);
  bool converged = false;
  int steps = 0;
};

// Newton inversion of the trilinear map seeded at the cell center.
InverseResult invert_trilinear(const HexCorners& c, const Vec3& q, int max_steps = 10,
                               double tolerance = 1e-6);

UnfoldedVolume resample_unfolded(const ScalarVolume& source, const WallModel& model,
                                 std::span<const Vec3> rest, std::span<const Vec3> deformed,
                                 const UnfoldedGrid& grid, const UnfoldPlane& plane);

// RMS signed distance of deformed hexahedron centroids to the plane.
double bending_rms(const WallModel& model, std::span<const Vec3> deformed,
                   const UnfoldPlane& plane);

enum class RenderMode { kMip, kSlabAverage };

std::string to_string(RenderMode mode);
RenderMode parse_render_mode(const std::string& text);

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, row j = grid index j

  std::uint8_t at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
};

// Linear window transfer to 0..255.
std::uint8_t window_value(double value, double center, double width);

// Orthographic projection along the thickness axis of the masked samples.
Image render_view(const ScalarVolume& values, const LabelVolume& mask, double window_center,
                  double window_width, RenderMode mode);

void write_pgm(const Image& image, std::ostream& out);
void write_pgm(const Image& image, const std::string& path);

}  // namespace vufold
