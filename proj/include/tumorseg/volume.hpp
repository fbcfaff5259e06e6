#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tumorseg/error.hpp"

namespace tumorseg {

struct Dims {
  int nx = 0;
  int ny = 0;
  int nz = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
  }
  bool valid() const { return nx > 0 && ny > 0 && nz > 0; }
  bool contains(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < nx && y < ny && z < nz;
  }
  friend bool operator==(const Dims&, const Dims&) = default;
};

inline std::string to_string(const Dims& d) {
  return std::to_string(d.nx) + "x" + std::to_string(d.ny) + "x" + std::to_string(d.nz);
}

/// Voxel size in millimetres.
struct Spacing {
  float sx = 1.0f;
  float sy = 1.0f;
  float sz = 1.0f;

  bool valid() const { return sx > 0.0f && sy > 0.0f && sz > 0.0f; }
  friend bool operator==(const Spacing&, const Spacing&) = default;
};

struct Voxel {
  int x = 0;
  int y = 0;
  int z = 0;
  friend bool operator==(const Voxel&, const Voxel&) = default;
  friend auto operator<=>(const Voxel&, const Voxel&) = default;
};

/// Linear index of (x, y, z) with x varying fastest.
inline std::size_t linear_index(const Dims& d, int x, int y, int z) {
  return (static_cast<std::size_t>(z) * static_cast<std::size_t>(d.ny) + static_cast<std::size_t>(y)) *
             static_cast<std::size_t>(d.nx) +
         static_cast<std::size_t>(x);
}

inline Voxel voxel_at(const Dims& d, std::size_t index) {
  const auto nx = static_cast<std::size_t>(d.nx);
  const auto ny = static_cast<std::size_t>(d.ny);
  return Voxel{static_cast<int>(index % nx), static_cast<int>((index / nx) % ny),
               static_cast<int>(index / (nx * ny))};
}

/// Dense voxel grid. The tag parameter only separates otherwise identical
/// storage types (labels vs masks) at compile time.
template <typename T, typename Tag = void>
class Grid3D {
 public:
  using value_type = T;

  Grid3D() = default;

  Grid3D(Dims dims, Spacing spacing = {}, T fill = T{})
      : dims_(dims), spacing_(spacing), data_(checked_count(dims, spacing), fill) {}

  Grid3D(Dims dims, Spacing spacing, std::vector<T> data)
      : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    if (data_.size() != checked_count(dims, spacing)) {
      throw Error(ErrorCode::DimensionMismatch,
                  "data length " + std::to_string(data_.size()) + " != " + to_string(dims));
    }
  }

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(int x, int y, int z) { return data_[linear_index(dims_, x, y, z)]; }
  const T& at(int x, int y, int z) const { return data_[linear_index(dims_, x, y, z)]; }
  T& at(const Voxel& v) { return at(v.x, v.y, v.z); }
  const T& at(const Voxel& v) const { return at(v.x, v.y, v.z); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  const std::vector<T>& values() const { return data_; }

  /// Same geometry, fresh storage of another element type.
  template <typename U, typename OtherTag = void>
  Grid3D<U, OtherTag> like(U fill = U{}) const {
    return Grid3D<U, OtherTag>(dims_, spacing_, fill);
  }

  friend bool operator==(const Grid3D&, const Grid3D&) = default;

 private:
  static std::size_t checked_count(const Dims& dims, const Spacing& spacing) {
    if (!dims.valid()) throw Error(ErrorCode::BadDimension, "dims must be positive, got " + to_string(dims));
    if (!spacing.valid()) throw Error(ErrorCode::InvalidArgument, "spacing must be positive");
    return dims.count();
  }

  Dims dims_{};
  Spacing spacing_{};
  std::vector<T> data_;
};

struct LabelTag;
struct MaskTag;

using Volume3D = Grid3D<float>;
using LabelVolume = Grid3D<std::uint8_t, LabelTag>;
using BinaryMask = Grid3D<std::uint8_t, MaskTag>;

inline constexpr int kNumClasses = 5;

/// BRATS label convention.
enum class Tissue : std::uint8_t {
  Normal = 0,
  Necrosis = 1,
  Oedema = 2,
  NonEnhancing = 3,
  Enhancing = 4,
};

template <typename A, typename TA, typename B, typename TB>
bool same_geometry(const Grid3D<A, TA>& a, const Grid3D<B, TB>& b) {
  return a.dims() == b.dims() && a.spacing() == b.spacing();
}

template <typename A, typename TA, typename B, typename TB>
void require_same_dims(const Grid3D<A, TA>& a, const Grid3D<B, TB>& b, const char* what) {
  if (a.dims() != b.dims()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": " + to_string(a.dims()) + " vs " + to_string(b.dims()));
  }
}

inline std::size_t count_true(const BinaryMask& m) {
  std::size_t n = 0;
  for (auto v : m.data()) n += v != 0;
  return n;
}

/// Mask of nonzero voxels.
inline BinaryMask nonzero_mask(const Volume3D& v) {
  BinaryMask m(v.dims(), v.spacing());
  for (std::size_t i = 0; i < v.size(); ++i) m[i] = v[i] != 0.0f;
  return m;
}

/// Converts real-valued voxels to labels, rejecting anything outside {0..4}.
inline LabelVolume to_labels(const Volume3D& v) {
  LabelVolume out(v.dims(), v.spacing());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const float f = v[i];
    const long r = static_cast<long>(f >= 0.0f ? f + 0.5f : f - 0.5f);
    if (r < 0 || r >= kNumClasses || static_cast<float>(r) != f) {
      throw Error(ErrorCode::InvalidArgument, "label value out of range: " + std::to_string(f));
    }
    out[i] = static_cast<std::uint8_t>(r);
  }
  return out;
}

inline Volume3D to_volume(const LabelVolume& labels) {
  Volume3D out(labels.dims(), labels.spacing());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i];
  return out;
}

enum class Modality : int { Flair = 0, T1c = 1, T2 = 2 };

inline constexpr std::array<Modality, 3> kModalities{Modality::Flair, Modality::T1c, Modality::T2};

inline const char* modality_name(Modality m) {
  switch (m) {
    case Modality::Flair: return "flair";
    case Modality::T1c: return "t1c";
    case Modality::T2: return "t2";
  }
  return "?";
}

/// Co-registered FLAIR, T1c and T2 volumes sharing one geometry.
class MultimodalVolume {
 public:
  MultimodalVolume() = default;

  MultimodalVolume(Volume3D flair, Volume3D t1c, Volume3D t2)
      : channels_{std::move(flair), std::move(t1c), std::move(t2)} {
    for (int i = 1; i < 3; ++i) {
      if (!same_geometry(channels_[0], channels_[i])) {
        throw Error(ErrorCode::DimensionMismatch,
                    std::string("modality ") + modality_name(static_cast<Modality>(i)) +
                        " geometry differs from flair");
      }
    }
  }

  const Volume3D& operator[](Modality m) const { return channels_[static_cast<int>(m)]; }
  const Volume3D& channel(int i) const { return channels_.at(static_cast<std::size_t>(i)); }
  const Dims& dims() const { return channels_[0].dims(); }
  const Spacing& spacing() const { return channels_[0].spacing(); }

  friend bool operator==(const MultimodalVolume&, const MultimodalVolume&) = default;

 private:
  std::array<Volume3D, 3> channels_;
};

inline MultimodalVolume stack_modalities(Volume3D flair, Volume3D t1c, Volume3D t2) {
  return MultimodalVolume(std::move(flair), std::move(t1c), std::move(t2));
}

/// Voxels that are nonzero in any modality.
inline BinaryMask brain_mask(const MultimodalVolume& mv) {
  BinaryMask m(mv.dims(), mv.spacing());
  for (std::size_t i = 0; i < m.size(); ++i) {
    m[i] = mv.channel(0)[i] != 0.0f || mv.channel(1)[i] != 0.0f || mv.channel(2)[i] != 0.0f;
  }
  return m;
}

}  // namespace tumorseg
