#pragma once

#include <cstdint>
#include <limits>
#include <queue>
#include <vector>

#include "tumorseg/parallel.hpp"
#include "tumorseg/volume.hpp"

namespace tumorseg {

namespace detail {

inline constexpr double kFar = std::numeric_limits<double>::infinity();

/// 1D squared distance transform (lower envelope of parabolas) over one line
/// of n samples; sites with infinite cost are skipped.
inline void distance_transform_1d(const double* f, int n, std::size_t stride, double* out,
                                  std::vector<int>& v, std::vector<double>& z, std::vector<double>& g) {
  g.resize(static_cast<std::size_t>(n));
  for (int q = 0; q < n; ++q) g[static_cast<std::size_t>(q)] = f[static_cast<std::size_t>(q) * stride];
  v.resize(static_cast<std::size_t>(n));
  z.resize(static_cast<std::size_t>(n) + 1);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (g[static_cast<std::size_t>(q)] == kFar) continue;
    const double fq = g[static_cast<std::size_t>(q)] + static_cast<double>(q) * q;
    double s = -kFar;
    while (k >= 0) {
      const int p = v[static_cast<std::size_t>(k)];
      s = (fq - (g[static_cast<std::size_t>(p)] + static_cast<double>(p) * p)) / (2.0 * (q - p));
      if (s > z[static_cast<std::size_t>(k)]) break;
      --k;
    }
    if (k < 0) s = -kFar;
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = s;
    z[static_cast<std::size_t>(k) + 1] = kFar;
  }
  if (k < 0) {
    for (int q = 0; q < n; ++q) out[static_cast<std::size_t>(q) * stride] = kFar;
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(j) + 1] < q) ++j;
    const int p = v[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(q) * stride] = static_cast<double>(q - p) * (q - p) + g[static_cast<std::size_t>(p)];
  }
}

}  // namespace detail

/// Exact squared Euclidean distance (in voxel units) from every voxel to the
/// nearest true voxel; +inf everywhere for an empty mask.
inline std::vector<double> squared_distance_transform(const BinaryMask& mask) {
  const Dims& d = mask.dims();
  std::vector<double> dist(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) dist[i] = mask[i] ? 0.0 : detail::kFar;
  const auto nx = static_cast<std::size_t>(d.nx);
  const auto ny = static_cast<std::size_t>(d.ny);
  const auto nz = static_cast<std::size_t>(d.nz);

  auto pass = [&](std::size_t lines, int length, std::size_t stride, auto&& line_start) {
    parallel_for(lines, [&](std::size_t b, std::size_t e) {
      std::vector<int> v;
      std::vector<double> z;
      std::vector<double> g;
      for (std::size_t l = b; l < e; ++l) {
        double* base = dist.data() + line_start(l);
        detail::distance_transform_1d(base, length, stride, base, v, z, g);
      }
    });
  };
  pass(ny * nz, d.nx, 1, [&](std::size_t l) { return l * nx; });
  pass(nx * nz, d.ny, nx, [&](std::size_t l) { return (l / nx) * nx * ny + (l % nx); });
  pass(nx * ny, d.nz, nx * ny, [&](std::size_t l) { return l; });
  return dist;
}

/// Dilation by a Euclidean ball: v is set iff some input voxel lies within
/// distance `radius` of v.
inline BinaryMask dilate3d(const BinaryMask& mask, int radius) {
  if (radius < 0) throw Error(ErrorCode::InvalidArgument, "dilation radius must be >= 0");
  if (radius == 0) return mask;
  const auto dist = squared_distance_transform(mask);
  const double limit = static_cast<double>(radius) * radius;
  BinaryMask out(mask.dims(), mask.spacing());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = dist[i] <= limit;
  return out;
}

struct Components {
  /// Component id per voxel, -1 for background. Ids follow the linear order
  /// of each component's first voxel.
  std::vector<int> id;
  std::vector<std::size_t> sizes;
};

/// 26-connected components of the true voxels.
inline Components connected_components(const BinaryMask& mask) {
  const Dims& d = mask.dims();
  Components c;
  c.id.assign(mask.size(), -1);
  std::vector<std::size_t> queue;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || c.id[start] >= 0) continue;
    const int label = static_cast<int>(c.sizes.size());
    std::size_t size = 0;
    queue.clear();
    queue.push_back(start);
    c.id[start] = label;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const Voxel v = voxel_at(d, queue[head]);
      ++size;
      for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int x = v.x + dx;
            const int y = v.y + dy;
            const int z = v.z + dz;
            if (!d.contains(x, y, z)) continue;
            const std::size_t j = linear_index(d, x, y, z);
            if (mask[j] && c.id[j] < 0) {
              c.id[j] = label;
              queue.push_back(j);
            }
          }
    }
    c.sizes.push_back(size);
  }
  return c;
}

}  // namespace tumorseg
