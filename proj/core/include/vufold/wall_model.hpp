#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "vufold/preprocess.hpp"
#include "vufold/volume.hpp"

namespace vufold {

enum class SpringKind : std::uint8_t { kEdge = 0, kFaceDiagonal = 1 };

struct Spring {
  int a = 0;
  int b = 0;
  double rest_length = 0.0;  // mm
  double stiffness = 0.0;    // N/mm
  double damping = 0.0;      // N*s/mm, damper co-located with the spring
  SpringKind kind = SpringKind::kEdge;
};

// Corner order: bit 0 is +x, bit 1 is +y, bit 2 is +z relative to the
// cell's lowest lattice corner.
struct Hexahedron {
  std::array<int, 8> vertices{};
  std::array<int, 3> cell{};      // lattice cell coordinates
  std::size_t center_voxel = 0;   // linear index of the center voxel
};

struct VertexSets {
  std::vector<int> outer;     // S_vo
  std::vector<int> inner;     // S_vi
  std::vector<int> boundary;  // S_vb, cut-edge vertices pulled to destinations
};

// Which lattice cells become hexahedra.
//  kCenterVoxel:  the cell's center voxel is wall.
//  kWallFraction: at least min_wall_fraction of the voxels in the closed
//                 cell box are wall.
enum class CellRule { kCenterVoxel, kWallFraction };

std::string to_string(CellRule rule);
CellRule parse_cell_rule(const std::string& text);

struct ModelParams {
  int d = 8;                           // lattice stride in x and y, voxels
  CellRule cell_rule = CellRule::kWallFraction;
  double min_wall_fraction = 0.2;
  double density = 1.0e-6;             // kg/mm^3
  double edge_stiffness = 0.05;        // N/mm
  double diagonal_stiffness = 0.025;   // N/mm
  double damping = 0.01;               // N*s/mm

  void validate() const;
};

struct WallModel {
  std::vector<Vec3> rest;       // r^(0)_i
  std::vector<double> mass;     // kg
  std::vector<Spring> springs;
  std::vector<Hexahedron> hexahedra;
  VertexSets sets;

  // Lattice description.
  int d = 0;
  int d_hat = 0;
  Vec3 spacing = Vec3::Ones();
  Vec3 cell_size = Vec3::Zero();  // mm per cell along x, y, z

  // Build diagnostics.
  std::vector<std::array<int, 3>> incision_cells;  // cells removed by the cut
  std::size_t dropped_components = 0;
  std::size_t dropped_hexahedra = 0;

  std::size_t vertex_count() const { return rest.size(); }
  double total_mass() const;
};

// d_hat = round(d * pixel spacing / slice spacing), at least 1.
int slice_stride(int d, const Vec3& spacing);

// Regular lattice of cells d x d x d_hat voxels; one hexahedron per cell whose
// center voxel is wall. Cells touched by the incision polyline are removed and
// only the largest vertex-connected component is kept. Vertex sets are left
// empty; see classify_vertex_sets.
WallModel build_hex_model(const LabelVolume& wall, const LabelVolume& air,
                          const IncisionLine& incision, const ModelParams& params = {});

// Inner faces border a missing cell that overlaps the lumen or was cut away
// by the incision; outer faces border any other missing cell.
VertexSets classify_vertex_sets(const WallModel& model, const LabelVolume& air,
                                const IncisionLine& incision);

// Unit vector pointing away from the lumen at p, from the balance of lumen and
// non-lumen voxels within radius_mm; zero when the neighborhood is uniform.
Vec3 outward_normal(const LabelVolume& air, const Vec3& p, double radius_mm = 2.5);

// Text dump: `v i x y z m`, `s i j L k kind`, `h id v0..v7`, `set vo|vi|vb i...`.
void write_model_dump(const WallModel& model, std::ostream& out);

}  // namespace vufold
