#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "vufold/phantom.hpp"
#include "vufold/pipeline.hpp"

namespace vufold::test {

// Phantoms and prepared models are built once per test binary.
inline const Phantom& straight_tube() {
  static const Phantom p = generate_phantom(PhantomSpec{});
  return p;
}

inline const Phantom& j_tube() {
  static const Phantom p = [] {
    PhantomSpec s;
    s.shape = TubeShape::kJTube;
    return generate_phantom(s);
  }();
  return p;
}

inline PipelineConfig config_for(const Phantom& p) {
  PipelineConfig cfg;
  cfg.cardia = p.truth.cardia;
  cfg.pylorus = p.truth.pylorus;
  return cfg;
}

inline const PreparedModel& straight_model() {
  static const PreparedModel m = prepare_model(config_for(straight_tube()), straight_tube().scalar);
  return m;
}

inline const PreparedModel& j_model() {
  static const PreparedModel m = prepare_model(config_for(j_tube()), j_tube().scalar);
  return m;
}

inline const PipelineResult& straight_run() {
  static const PipelineResult r = run_pipeline(config_for(straight_tube()), straight_tube().scalar);
  return r;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("vufold_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace vufold::test

namespace vufold::test {

// Small random wall model: a random subset of cells in a lattice of at most
// 4x4x4, with random anisotropic spacing and stride. At most 64 hexahedra.
inline WallModel random_model(std::mt19937& rng) {
  std::uniform_int_distribution<int> extent(1, 4), stride(4, 8);
  std::uniform_real_distribution<double> pixel(0.6, 1.0), ratio(0.8, 1.5), unit(0.0, 1.0);
  const int d = stride(rng);
  const double sx = pixel(rng);
  const Vec3 spacing(sx, sx, sx * ratio(rng));
  const int d_hat = slice_stride(d, spacing);
  const std::array<int, 3> n{extent(rng), extent(rng), extent(rng)};
  const GridDims dims{n[0] * d + 1, n[1] * d + 1, n[2] * d_hat + 1};
  LabelVolume wall(dims, spacing, label::kBackground);
  const LabelVolume air(dims, spacing, label::kBackground);
  bool any = false;
  for (int c = 0; c < n[2]; ++c)
    for (int b = 0; b < n[1]; ++b)
      for (int a = 0; a < n[0]; ++a) {
        if (any && unit(rng) > 0.6) continue;
        any = true;
        wall.at(a * d + d / 2, b * d + d / 2, c * d_hat + d_hat / 2) = label::kWall;
      }
  ModelParams p;
  p.d = d;
  p.cell_rule = CellRule::kCenterVoxel;
  return build_hex_model(wall, air, {}, p);
}

}  // namespace vufold::test
