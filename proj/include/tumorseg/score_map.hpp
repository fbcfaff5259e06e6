#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tumorseg/binary_io.hpp"
#include "tumorseg/volume.hpp"

namespace tumorseg {

/// Per-voxel class probabilities, kNumClasses per voxel, voxel-major.
class ScoreMap {
 public:
  ScoreMap() = default;
  explicit ScoreMap(Dims dims) : dims_(dims), data_(dims.count() * kNumClasses, 0.0f) {
    if (!dims.valid()) throw Error(ErrorCode::BadDimension, "score map dims must be positive");
  }

  const Dims& dims() const { return dims_; }
  std::size_t voxel_count() const { return dims_.count(); }

  std::span<float> voxel(std::size_t i) { return {data_.data() + i * kNumClasses, kNumClasses}; }
  std::span<const float> voxel(std::size_t i) const { return {data_.data() + i * kNumClasses, kNumClasses}; }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  friend bool operator==(const ScoreMap&, const ScoreMap&) = default;

 private:
  Dims dims_{};
  std::vector<float> data_;
};

/// Highest-scoring class; ties resolve to the lowest label.
inline int argmax_label(std::span<const float> scores) {
  int best = 0;
  for (int c = 1; c < static_cast<int>(scores.size()); ++c) {
    if (scores[static_cast<std::size_t>(c)] > scores[static_cast<std::size_t>(best)]) best = c;
  }
  return best;
}

inline bool is_simplex(const ScoreMap& s, double tol = 1e-5) {
  for (std::size_t i = 0; i < s.voxel_count(); ++i) {
    double sum = 0.0;
    for (float v : s.voxel(i)) {
      if (!(v >= 0.0f)) return false;
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol) return false;
  }
  return true;
}

// File layout: "SCMP", u32 version = 1, i32 nx, ny, nz, u32 channels, then
// float32 scores voxel-major (x fastest), channel-fastest within a voxel.

inline std::vector<char> encode_score_map(const ScoreMap& s) {
  ByteWriter w;
  w.put_bytes("SCMP");
  w.put<std::uint32_t>(1);
  w.put<std::int32_t>(s.dims().nx);
  w.put<std::int32_t>(s.dims().ny);
  w.put<std::int32_t>(s.dims().nz);
  w.put<std::uint32_t>(kNumClasses);
  w.put_span(s.data());
  return std::move(w.bytes());
}

inline ScoreMap decode_score_map(std::span<const char> bytes, const std::string& context = "score map") {
  ByteReader r(bytes, context);
  if (r.get_string(4) != "SCMP") throw Error(ErrorCode::BadMagic, context + ": expected SCMP");
  if (r.get<std::uint32_t>() != 1) throw Error(ErrorCode::BadHeader, context + ": unsupported version");
  Dims d;
  d.nx = r.get<std::int32_t>();
  d.ny = r.get<std::int32_t>();
  d.nz = r.get<std::int32_t>();
  if (!d.valid()) throw Error(ErrorCode::BadDimension, context + ": non-positive dims");
  if (r.get<std::uint32_t>() != kNumClasses) throw Error(ErrorCode::ShapeMismatch, context + ": channels != 5");
  ScoreMap s(d);
  r.get_span(s.data());
  if (!is_simplex(s)) throw Error(ErrorCode::InvalidArgument, context + ": scores are not on the simplex");
  return s;
}

inline void write_score_map(const ScoreMap& s, const std::filesystem::path& path) {
  atomic_write_file(path, encode_score_map(s));
}

inline ScoreMap read_score_map(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode_score_map(bytes, path.string());
}

}  // namespace tumorseg
