#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tumorseg/binary_io.hpp"
#include "tumorseg/morphology.hpp"
#include "tumorseg/score_map.hpp"
#include "tumorseg/texton.hpp"
#include "tumorseg/volume.hpp"

namespace tumorseg {

/// Columns: 5 class scores, 3 intensities, then one k-bin texton histogram per modality.
inline int feature_count(int texton_k) { return kNumClasses + 3 + 3 * texton_k; }

inline constexpr int kDefaultFeatureCount = 56;
static_assert(kNumClasses + 3 + 3 * 16 == kDefaultFeatureCount);

inline std::vector<std::string> feature_names(int texton_k = 16) {
  std::vector<std::string> names;
  for (int c = 0; c < kNumClasses; ++c) names.push_back("score_" + std::to_string(c));
  for (auto m : kModalities) names.push_back(std::string("intensity_") + modality_name(m));
  for (auto m : kModalities)
    for (int t = 0; t < texton_k; ++t) names.push_back(std::string("texton_") + modality_name(m) + "_" + std::to_string(t));
  return names;
}

struct RoiConfig {
  int margin_voxels = 10;
};

/// Row-major feature values; `coords` is either empty or gives each row's voxel.
struct FeatureMatrix {
  int cols = kDefaultFeatureCount;
  std::vector<float> values;
  std::vector<Voxel> coords;

  std::size_t rows() const { return cols > 0 ? values.size() / static_cast<std::size_t>(cols) : 0; }
  std::span<const float> row(std::size_t i) const {
    return {values.data() + i * static_cast<std::size_t>(cols), static_cast<std::size_t>(cols)};
  }
  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

/// Voxels whose highest class score is a tumor label.
inline BinaryMask tumor_roi(const ScoreMap& scores) {
  BinaryMask roi(scores.dims());
  for (std::size_t i = 0; i < scores.voxel_count(); ++i) roi[i] = argmax_label(scores.voxel(i)) != 0;
  return roi;
}

/// Tumor detections grown by the confidence margin.
inline BinaryMask classification_region(const ScoreMap& scores, const RoiConfig& cfg = {}) {
  return dilate3d(tumor_roi(scores), cfg.margin_voxels);
}

struct TextonMaps {
  std::array<TextonMap, 3> maps;
  int k = 16;
  int window = 5;
  bool volumetric = false;
};

/// Feature rows for every ROI voxel in x-fastest order.
inline FeatureMatrix assemble_features(const ScoreMap& scores, const MultimodalVolume& mv, const TextonMaps& textons,
                                       const BinaryMask& roi) {
  const Dims& d = mv.dims();
  if (scores.dims() != d || roi.dims() != d) throw Error(ErrorCode::DimensionMismatch, "feature inputs");
  for (const auto& m : textons.maps) {
    if (m.dims() != d) throw Error(ErrorCode::DimensionMismatch, "texton map dims");
  }
  FeatureMatrix fm;
  fm.cols = feature_count(textons.k);
  for (std::size_t i = 0; i < roi.size(); ++i) {
    if (roi[i]) fm.coords.push_back(voxel_at(d, i));
  }
  const auto cols = static_cast<std::size_t>(fm.cols);
  fm.values.resize(fm.coords.size() * cols);
  parallel_for(
      fm.coords.size(),
      [&](std::size_t b, std::size_t e) {
        for (std::size_t r = b; r < e; ++r) {
          const Voxel v = fm.coords[r];
          const std::size_t li = linear_index(d, v.x, v.y, v.z);
          float* out = fm.values.data() + r * cols;
          const auto s = scores.voxel(li);
          std::copy(s.begin(), s.end(), out);
          out += kNumClasses;
          for (int m = 0; m < 3; ++m) *out++ = mv.channel(m)[li];
          for (int m = 0; m < 3; ++m) {
            const auto h = texton_histogram(textons.maps[static_cast<std::size_t>(m)], v, textons.window, textons.k,
                                            textons.volumetric);
            out = std::copy(h.begin(), h.end(), out);
          }
        }
      },
      64);
  return fm;
}

// Feature dump: u32 rows, u32 cols, then per row cols x float32 followed by
// 3 x int32 voxel coordinates.

inline std::vector<char> encode_features(const FeatureMatrix& fm) {
  if (fm.coords.size() != fm.rows()) throw Error(ErrorCode::InvalidArgument, "feature dump needs one voxel per row");
  ByteWriter w;
  w.put<std::uint32_t>(static_cast<std::uint32_t>(fm.rows()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(fm.cols));
  for (std::size_t r = 0; r < fm.rows(); ++r) {
    w.put_span(fm.row(r));
    w.put<std::int32_t>(fm.coords[r].x);
    w.put<std::int32_t>(fm.coords[r].y);
    w.put<std::int32_t>(fm.coords[r].z);
  }
  return std::move(w.bytes());
}

inline FeatureMatrix decode_features(std::span<const char> bytes, const std::string& context = "features") {
  ByteReader r(bytes, context);
  const auto rows = r.get<std::uint32_t>();
  const auto cols = r.get<std::uint32_t>();
  if (cols == 0 || cols > 1u << 16) throw Error(ErrorCode::BadHeader, context + ": column count");
  if (static_cast<std::uint64_t>(rows) * (cols * 4ull + 12ull) > r.remaining()) {
    throw Error(ErrorCode::Truncated, context + ": rows");
  }
  FeatureMatrix fm;
  fm.cols = static_cast<int>(cols);
  fm.values.resize(static_cast<std::size_t>(rows) * cols);
  fm.coords.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    r.get_span<float>(std::span<float>(fm.values.data() + i * cols, cols));
    fm.coords[i] = Voxel{r.get<std::int32_t>(), r.get<std::int32_t>(), r.get<std::int32_t>()};
  }
  return fm;
}

inline void write_features(const FeatureMatrix& fm, const std::filesystem::path& path) {
  atomic_write_file(path, encode_features(fm));
}

inline FeatureMatrix read_features(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode_features(bytes, path.string());
}

}  // namespace tumorseg
