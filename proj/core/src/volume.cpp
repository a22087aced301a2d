#include "vufold/volume.hpp"

#include <algorithm>

namespace vufold {

namespace {

template <typename T>
double interpolate(const Volume<T>& volume, const Vec3& p, double outside) {
  const GridDims& d = volume.dims();
  const Vec3 v = volume.to_voxel(p);
  // Tolerate round-off at the last voxel center.
  constexpr double kEdge = 1e-9;
  if (!(v.x() >= -kEdge && v.y() >= -kEdge && v.z() >= -kEdge &&
        v.x() <= d.nx - 1 + kEdge && v.y() <= d.ny - 1 + kEdge &&
        v.z() <= d.nz - 1 + kEdge)) {
    return outside;
  }
  std::array<int, 3> base{};
  std::array<double, 3> frac{};
  const std::array<int, 3> n{d.nx, d.ny, d.nz};
  for (int a = 0; a < 3; ++a) {
    const double c = std::clamp(v[a], 0.0, static_cast<double>(n[a] - 1));
    int b = static_cast<int>(std::floor(c));
    if (b >= n[a] - 1) b = std::max(n[a] - 2, 0);
    base[a] = b;
    frac[a] = n[a] == 1 ? 0.0 : c - b;
  }
  double acc = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    const int dx = corner & 1;
    const int dy = (corner >> 1) & 1;
    const int dz = (corner >> 2) & 1;
    const double w = (dx ? frac[0] : 1.0 - frac[0]) * (dy ? frac[1] : 1.0 - frac[1]) *
                     (dz ? frac[2] : 1.0 - frac[2]);
    if (w == 0.0) continue;
    const int i = std::min(base[0] + dx, n[0] - 1);
    const int j = std::min(base[1] + dy, n[1] - 1);
    const int k = std::min(base[2] + dz, n[2] - 1);
    acc += w * static_cast<double>(volume.at(i, j, k));
  }
  return acc;
}

constexpr auto make_full_neighborhood() {
  std::array<std::array<int, 3>, 26> out{};
  std::size_t n = 0;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        if (dx != 0 || dy != 0 || dz != 0) out[n++] = {dx, dy, dz};
  return out;
}

constexpr auto kFull = make_full_neighborhood();

}  // namespace

double trilinear_sample(const ScalarVolume& volume, const Vec3& p) {
  return interpolate(volume, p, static_cast<double>(kBackgroundValue));
}

double trilinear_sample(const Volume<double>& volume, const Vec3& p, double outside) {
  return interpolate(volume, p, outside);
}

std::span<const std::array<int, 3>> full_neighborhood() { return kFull; }

std::vector<std::uint8_t> mask_of(const LabelVolume& labels, std::uint8_t code) {
  std::vector<std::uint8_t> out(labels.data().size());
  std::transform(labels.data().begin(), labels.data().end(), out.begin(),
                 [code](std::uint8_t v) { return v == code ? 1 : 0; });
  return out;
}

std::size_t count_label(const LabelVolume& labels, std::uint8_t code) {
  return static_cast<std::size_t>(
      std::count(labels.data().begin(), labels.data().end(), code));
}

double dice(const LabelVolume& a, std::uint8_t code_a, const LabelVolume& b,
            std::uint8_t code_b) {
  if (!(a.dims() == b.dims())) throw ConfigError("dice: volume dimensions differ");
  std::size_t na = 0, nb = 0, both = 0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const bool in_a = da[i] == code_a;
    const bool in_b = db[i] == code_b;
    na += in_a;
    nb += in_b;
    both += in_a && in_b;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

}  // namespace vufold
