#pragma once

#include <cstdint>
#include <vector>

#include "vufold/volume.hpp"

namespace vufold {

// Exact Euclidean distance (mm) from every voxel with mask != 0 to the nearest
// voxel with mask == 0; zero on the background. Separable lower-envelope
// algorithm, one pass per axis, honoring anisotropic spacing. Voxels beyond
// the grid are not treated as background.
Volume<double> euclidean_distance_transform(const std::vector<std::uint8_t>& mask,
                                            GridDims dims, const Vec3& spacing);

}  // namespace vufold
