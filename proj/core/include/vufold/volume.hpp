#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "vufold/error.hpp"

namespace vufold {

using Vec3 = Eigen::Vector3d;

struct Index3 {
  int i = 0;
  int j = 0;
  int k = 0;

  friend bool operator==(const Index3&, const Index3&) = default;
};

struct GridDims {
  int nx = 0;
  int ny = 0;
  int nz = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
           static_cast<std::size_t>(nz);
  }
  bool valid() const { return nx > 0 && ny > 0 && nz > 0; }

  friend bool operator==(const GridDims&, const GridDims&) = default;
};

namespace label {
inline constexpr std::uint8_t kBackground = 0;
inline constexpr std::uint8_t kWall = 1;
inline constexpr std::uint8_t kAir = 2;
}  // namespace label

// Intensity returned for samples outside the grid and for empty voxels.
inline constexpr std::int16_t kBackgroundValue = -1024;

// Dense voxel grid, x-fastest. Voxel (i, j, k) has its center at world
// position (i*sx, j*sy, k*sz) in millimeters.
template <typename T>
class Volume {
 public:
  using value_type = T;

  Volume() = default;

  Volume(GridDims dims, const Vec3& spacing, T fill = T{})
      : dims_(dims), spacing_(spacing) {
    check_geometry(dims, spacing);
    data_.assign(dims.count(), fill);
  }

  Volume(GridDims dims, const Vec3& spacing, std::vector<T> data)
      : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    check_geometry(dims, spacing);
    if (data_.size() != dims.count()) {
      throw ConfigError("volume data length does not match dimensions");
    }
  }

  const GridDims& dims() const { return dims_; }
  const Vec3& spacing() const { return spacing_; }
  bool empty() const { return data_.empty(); }

  std::span<const T> data() const { return data_; }
  std::span<T> data() { return data_; }

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_.nx) *
               (static_cast<std::size_t>(j) +
                static_cast<std::size_t>(dims_.ny) * static_cast<std::size_t>(k));
  }
  std::size_t index(const Index3& v) const { return index(v.i, v.j, v.k); }

  Index3 unravel(std::size_t idx) const {
    const auto nx = static_cast<std::size_t>(dims_.nx);
    const auto ny = static_cast<std::size_t>(dims_.ny);
    return {static_cast<int>(idx % nx), static_cast<int>((idx / nx) % ny),
            static_cast<int>(idx / (nx * ny))};
  }

  bool contains(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims_.nx && j < dims_.ny && k < dims_.nz;
  }
  bool contains(const Index3& v) const { return contains(v.i, v.j, v.k); }

  T& at(int i, int j, int k) { return data_[index(i, j, k)]; }
  const T& at(int i, int j, int k) const { return data_[index(i, j, k)]; }
  T& at(const Index3& v) { return data_[index(v)]; }
  const T& at(const Index3& v) const { return data_[index(v)]; }

  Vec3 world(int i, int j, int k) const {
    return {i * spacing_.x(), j * spacing_.y(), k * spacing_.z()};
  }
  Vec3 world(const Index3& v) const { return world(v.i, v.j, v.k); }
  Vec3 world(std::size_t idx) const { return world(unravel(idx)); }

  // Continuous voxel coordinates of a world point.
  Vec3 to_voxel(const Vec3& p) const { return p.cwiseQuotient(spacing_); }

  Index3 nearest_voxel(const Vec3& p) const {
    const Vec3 v = to_voxel(p);
    return {static_cast<int>(std::lround(v.x())), static_cast<int>(std::lround(v.y())),
            static_cast<int>(std::lround(v.z()))};
  }

  friend bool operator==(const Volume& a, const Volume& b) {
    return a.dims_ == b.dims_ && a.spacing_ == b.spacing_ && a.data_ == b.data_;
  }

 private:
  static void check_geometry(const GridDims& dims, const Vec3& spacing) {
    if (!dims.valid()) throw ConfigError("volume dimensions must be positive");
    for (int a = 0; a < 3; ++a) {
      if (!std::isfinite(spacing[a]) || spacing[a] <= 0.0) {
        throw ConfigError("volume spacing must be finite and positive");
      }
    }
  }

  GridDims dims_{};
  Vec3 spacing_ = Vec3::Ones();
  std::vector<T> data_;
};

using ScalarVolume = Volume<std::int16_t>;
using LabelVolume = Volume<std::uint8_t>;

// Trilinear interpolation between the 8 surrounding voxel centers. Points
// outside the hull of voxel centers return kBackgroundValue.
double trilinear_sample(const ScalarVolume& volume, const Vec3& p);

// Same as above over a dense double field laid out like `volume`.
double trilinear_sample(const Volume<double>& volume, const Vec3& p, double outside);

// The 6-connected face neighbors and the 26-connected neighborhood.
inline constexpr std::array<std::array<int, 3>, 6> kFaceNeighbors{{
    {-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}}};

std::span<const std::array<int, 3>> full_neighborhood();

// Labels equal to `code` as a boolean mask.
std::vector<std::uint8_t> mask_of(const LabelVolume& labels, std::uint8_t code);

std::size_t count_label(const LabelVolume& labels, std::uint8_t code);

// Dice overlap of label `code` in a against label `code_b` in b.
double dice(const LabelVolume& a, std::uint8_t code_a, const LabelVolume& b,
            std::uint8_t code_b);

}  // namespace vufold
