#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "tumorseg/binary_io.hpp"
#include "tumorseg/gabor.hpp"
#include "tumorseg/kmeans.hpp"
#include "tumorseg/parallel.hpp"
#include "tumorseg/volume.hpp"

namespace tumorseg {

struct TextonTag;
using TextonMap = Grid3D<std::uint16_t, TextonTag>;

struct TextonConfig {
  int k = 16;
  int window = 5;
  /// Use a window x window x window cube instead of the in-plane square.
  bool volumetric = false;
  GaborGrid grid;
  /// Cap on pooled foreground voxels used to fit each codebook.
  std::size_t max_samples = 200000;
  int max_iter = 100;
  double tol = 1e-4;

  void validate() const {
    if (k < 1 || k > 65535) throw Error(ErrorCode::InvalidArgument, "texton k must lie in [1, 65535]");
    if (window < 1 || window % 2 == 0) throw Error(ErrorCode::InvalidArgument, "texton window must be odd");
    if (max_samples < static_cast<std::size_t>(k)) {
      throw Error(ErrorCode::InvalidArgument, "max_samples must be >= k");
    }
  }
};

struct TextonCodebook {
  int k = 0;
  int dim = 0;
  Modality modality = Modality::Flair;
  std::vector<float> centroids;  // k x dim

  std::span<const float> centroid(int c) const {
    return {centroids.data() + static_cast<std::size_t>(c) * dim, static_cast<std::size_t>(dim)};
  }
  friend bool operator==(const TextonCodebook&, const TextonCodebook&) = default;
};

inline TextonCodebook make_codebook(const KMeansResult& fit, Modality modality) {
  TextonCodebook cb{fit.k, fit.dim, modality, {}};
  cb.centroids.reserve(fit.centroids.size());
  for (double v : fit.centroids) cb.centroids.push_back(static_cast<float>(v));
  return cb;
}

/// Nearest centroid by squared Euclidean distance, lowest index on ties.
inline int nearest_texton(std::span<const float> response, const TextonCodebook& cb) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int c = 0; c < cb.k; ++c) {
    const float* ctr = cb.centroids.data() + static_cast<std::size_t>(c) * cb.dim;
    double d = 0.0;
    for (int j = 0; j < cb.dim; ++j) {
      const double diff = static_cast<double>(response[static_cast<std::size_t>(j)]) - ctr[j];
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

inline TextonMap assign_textons(const ResponseStack& responses, const TextonCodebook& cb) {
  if (responses.filters != cb.dim) {
    throw Error(ErrorCode::DimensionMismatch, "response dim " + std::to_string(responses.filters) +
                                                  " != codebook dim " + std::to_string(cb.dim));
  }
  TextonMap map(responses.dims);
  parallel_for(
      map.size(),
      [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) map[i] = static_cast<std::uint16_t>(nearest_texton(responses.voxel(i), cb));
      },
      256);
  return map;
}

/// Texton map computed slice by slice, so the full response stack never has
/// to be held in memory. Slices with `needed[z] == 0` are left at label 0.
inline TextonMap compute_texton_map(const Volume3D& vol, const FilterBank& bank, const TextonCodebook& cb,
                                    std::span<const std::uint8_t> needed = {}) {
  if (static_cast<int>(bank.size()) != cb.dim) {
    throw Error(ErrorCode::DimensionMismatch, "filter bank size != codebook dim");
  }
  const Dims& d = vol.dims();
  TextonMap map(d, vol.spacing());
  const std::size_t plane = static_cast<std::size_t>(d.nx) * static_cast<std::size_t>(d.ny);
  parallel_for(static_cast<std::size_t>(d.nz), [&](std::size_t b, std::size_t e) {
    for (std::size_t z = b; z < e; ++z) {
      if (!needed.empty() && !needed[z]) continue;
      const auto resp = convolve_slice(vol, static_cast<int>(z), bank);
      for (std::size_t p = 0; p < plane; ++p) {
        map[z * plane + p] = static_cast<std::uint16_t>(
            nearest_texton(std::span<const float>(resp.data() + p * bank.size(), bank.size()), cb));
      }
    }
  });
  return map;
}

/// Filter responses at the given voxels (sorted linear indices), one row each.
inline std::vector<float> sample_responses(const Volume3D& vol, const FilterBank& bank,
                                           std::span<const std::size_t> voxels) {
  const Dims& d = vol.dims();
  const std::size_t plane = static_cast<std::size_t>(d.nx) * static_cast<std::size_t>(d.ny);
  const std::size_t nf = bank.size();
  std::vector<float> rows(voxels.size() * nf);
  // Group voxel positions by slice; each slice is filtered once.
  std::vector<std::size_t> slice_begin(static_cast<std::size_t>(d.nz) + 1, 0);
  for (std::size_t v : voxels) ++slice_begin[v / plane + 1];
  for (std::size_t z = 0; z < static_cast<std::size_t>(d.nz); ++z) slice_begin[z + 1] += slice_begin[z];
  parallel_for(static_cast<std::size_t>(d.nz), [&](std::size_t b, std::size_t e) {
    for (std::size_t z = b; z < e; ++z) {
      if (slice_begin[z] == slice_begin[z + 1]) continue;
      const auto resp = convolve_slice(vol, static_cast<int>(z), bank);
      for (std::size_t r = slice_begin[z]; r < slice_begin[z + 1]; ++r) {
        const std::size_t p = voxels[r] - z * plane;
        std::copy(resp.begin() + static_cast<std::ptrdiff_t>(p * nf),
                  resp.begin() + static_cast<std::ptrdiff_t>((p + 1) * nf), rows.begin() + static_cast<std::ptrdiff_t>(r * nf));
      }
    }
  });
  return rows;
}

/// Raw label counts in the window centred on `v`, clipped to the volume.
inline std::vector<std::uint32_t> texton_counts(const TextonMap& map, Voxel v, int window, int k,
                                                bool volumetric = false) {
  const Dims& d = map.dims();
  if (!d.contains(v.x, v.y, v.z)) throw Error(ErrorCode::OutOfBounds, "voxel outside texton map");
  const int r = window / 2;
  std::vector<std::uint32_t> counts(static_cast<std::size_t>(k), 0);
  const int z0 = volumetric ? std::max(0, v.z - r) : v.z;
  const int z1 = volumetric ? std::min(d.nz - 1, v.z + r) : v.z;
  for (int z = z0; z <= z1; ++z)
    for (int y = std::max(0, v.y - r); y <= std::min(d.ny - 1, v.y + r); ++y)
      for (int x = std::max(0, v.x - r); x <= std::min(d.nx - 1, v.x + r); ++x) {
        const auto label = map.at(x, y, z);
        if (label >= k) throw Error(ErrorCode::OutOfBounds, "texton label exceeds k");
        ++counts[label];
      }
  return counts;
}

/// Texton histogram around a voxel, normalized to sum to 1.
inline std::vector<float> texton_histogram(const TextonMap& map, Voxel v, int window = 5, int k = 16,
                                           bool volumetric = false) {
  const auto counts = texton_counts(map, v, window, k, volumetric);
  std::uint32_t total = 0;
  for (auto c : counts) total += c;
  std::vector<float> h(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) h[i] = static_cast<float>(counts[i]) / static_cast<float>(total);
  return h;
}

// Codebook file: "TXCB", u32 k, u32 dim, u8 modality, float32 centroids row-major.

inline std::vector<char> encode_codebook(const TextonCodebook& cb) {
  ByteWriter w;
  w.put_bytes("TXCB");
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cb.k));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cb.dim));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(cb.modality));
  w.put_span<float>(cb.centroids);
  return std::move(w.bytes());
}

inline TextonCodebook decode_codebook(std::span<const char> bytes, const std::string& context = "codebook") {
  ByteReader r(bytes, context);
  if (r.get_string(4) != "TXCB") throw Error(ErrorCode::BadMagic, context + ": expected TXCB");
  TextonCodebook cb;
  cb.k = static_cast<int>(r.get<std::uint32_t>());
  cb.dim = static_cast<int>(r.get<std::uint32_t>());
  const auto tag = r.get<std::uint8_t>();
  if (tag > 2) throw Error(ErrorCode::BadHeader, context + ": unknown modality tag");
  cb.modality = static_cast<Modality>(tag);
  if (cb.k < 1 || cb.dim < 1) throw Error(ErrorCode::BadHeader, context + ": empty codebook");
  const std::size_t n = static_cast<std::size_t>(cb.k) * static_cast<std::size_t>(cb.dim);
  if (n * sizeof(float) > r.remaining()) throw Error(ErrorCode::Truncated, context + ": centroids");
  cb.centroids.resize(n);
  r.get_span<float>(cb.centroids);
  return cb;
}

inline void save_codebook(const TextonCodebook& cb, const std::filesystem::path& path) {
  atomic_write_file(path, encode_codebook(cb));
}

inline TextonCodebook load_codebook(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode_codebook(bytes, path.string());
}

}  // namespace tumorseg
