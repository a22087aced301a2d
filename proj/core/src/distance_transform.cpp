#include "vufold/distance_transform.hpp"

#include <limits>

namespace vufold {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1-D squared distance transform of sampled function f with sample spacing h.
void edt_1d(const std::vector<double>& f, double h, std::vector<double>& out,
            std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    const double pos_q = q * h;
    while (k >= 0) {
      const double pos_v = v[k] * h;
      const double s =
          ((f[q] + pos_q * pos_q) - (f[v[k]] + pos_v * pos_v)) / (2.0 * (pos_q - pos_v));
      if (s <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = k == 0 ? -kInf
                  : ((f[q] + pos_q * pos_q) - (f[v[k - 1]] + (v[k - 1] * h) * (v[k - 1] * h))) /
                        (2.0 * (pos_q - v[k - 1] * h));
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(out.begin(), out.end(), kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q * h) ++j;
    const double d = (q - v[j]) * h;
    out[q] = d * d + f[v[j]];
  }
}

}  // namespace

Volume<double> euclidean_distance_transform(const std::vector<std::uint8_t>& mask,
                                            GridDims dims, const Vec3& spacing) {
  if (mask.size() != dims.count()) throw ConfigError("distance transform: mask size mismatch");
  Volume<double> dist(dims, spacing, 0.0);
  auto data = dist.data();
  for (std::size_t i = 0; i < mask.size(); ++i) data[i] = mask[i] ? kInf : 0.0;

  const std::array<int, 3> n{dims.nx, dims.ny, dims.nz};
  const int longest = std::max({n[0], n[1], n[2]});
  std::vector<double> f(longest), out(longest), z(longest + 1);
  std::vector<int> v(longest);

  for (int axis = 0; axis < 3; ++axis) {
    const int len = n[axis];
    f.resize(len);
    out.resize(len);
    const int a1 = (axis + 1) % 3;
    const int a2 = (axis + 2) % 3;
    for (int p2 = 0; p2 < n[a2]; ++p2) {
      for (int p1 = 0; p1 < n[a1]; ++p1) {
        std::array<int, 3> c{};
        c[a1] = p1;
        c[a2] = p2;
        for (int q = 0; q < len; ++q) {
          c[axis] = q;
          f[q] = dist.at(c[0], c[1], c[2]);
        }
        edt_1d(f, spacing[axis], out, v, z);
        for (int q = 0; q < len; ++q) {
          c[axis] = q;
          dist.at(c[0], c[1], c[2]) = out[q];
        }
      }
    }
  }
  for (auto& d : data) d = std::sqrt(d);
  return dist;
}

}  // namespace vufold
