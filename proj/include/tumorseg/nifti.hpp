#pragma once

// Minimal single-file NIfTI-1 support: uncompressed .nii, 3D, little-endian,
// uint8 / int16 / float32 payloads. Orientation fields are written neutral
// and ignored on read.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "tumorseg/binary_io.hpp"
#include "tumorseg/volume.hpp"

namespace tumorseg::nifti {

inline constexpr std::int32_t kHeaderSize = 348;
inline constexpr std::size_t kDefaultVoxOffset = 352;

enum class Datatype : std::int16_t {
  UInt8 = 2,
  Int16 = 4,
  Float32 = 16,
};

// Byte offsets within the 348-byte header.
namespace offset {
inline constexpr std::size_t sizeof_hdr = 0;
inline constexpr std::size_t dim = 40;
inline constexpr std::size_t datatype = 70;
inline constexpr std::size_t bitpix = 72;
inline constexpr std::size_t pixdim = 76;
inline constexpr std::size_t vox_offset = 108;
inline constexpr std::size_t scl_slope = 112;
inline constexpr std::size_t scl_inter = 116;
inline constexpr std::size_t xyzt_units = 123;
inline constexpr std::size_t magic = 344;
}  // namespace offset

inline int bytes_per_voxel(Datatype t) {
  switch (t) {
    case Datatype::UInt8: return 1;
    case Datatype::Int16: return 2;
    case Datatype::Float32: return 4;
  }
  return 0;
}

inline Volume3D decode(std::span<const char> bytes, const std::string& context = "nifti") {
  ByteReader r(bytes, context);
  if (bytes.size() < static_cast<std::size_t>(kHeaderSize)) {
    throw Error(ErrorCode::Truncated, context + ": header shorter than 348 bytes");
  }
  r.seek(offset::magic);
  const std::string magic = r.get_string(4);
  if (magic != std::string("n+1\0", 4)) throw Error(ErrorCode::BadMagic, context + ": magic is not n+1");
  r.seek(offset::sizeof_hdr);
  if (r.get<std::int32_t>() != kHeaderSize) throw Error(ErrorCode::BadHeader, context + ": sizeof_hdr != 348");

  r.seek(offset::dim);
  std::int16_t dim[8];
  for (auto& d : dim) d = r.get<std::int16_t>();
  if (dim[0] != 3) {
    throw Error(ErrorCode::BadDimension, context + ": expected 3 dimensions, got " + std::to_string(dim[0]));
  }
  const Dims dims{dim[1], dim[2], dim[3]};
  if (!dims.valid()) throw Error(ErrorCode::BadDimension, context + ": non-positive extent");

  r.seek(offset::datatype);
  const auto raw_type = r.get<std::int16_t>();
  Datatype type;
  switch (raw_type) {
    case 2: type = Datatype::UInt8; break;
    case 4: type = Datatype::Int16; break;
    case 16: type = Datatype::Float32; break;
    default:
      throw Error(ErrorCode::UnsupportedDatatype, context + ": datatype " + std::to_string(raw_type));
  }

  r.seek(offset::pixdim);
  float pixdim[8];
  for (auto& p : pixdim) p = r.get<float>();
  Spacing spacing{pixdim[1], pixdim[2], pixdim[3]};
  if (!spacing.valid()) throw Error(ErrorCode::BadHeader, context + ": non-positive pixdim");

  r.seek(offset::vox_offset);
  const float vox_offset = r.get<float>();
  const float slope = r.get<float>();
  const float inter = r.get<float>();
  if (!(vox_offset >= static_cast<float>(kDefaultVoxOffset)) || vox_offset != std::floor(vox_offset)) {
    throw Error(ErrorCode::BadHeader, context + ": invalid vox_offset");
  }
  const bool scaled = slope != 0.0f && std::isfinite(slope) && std::isfinite(inter);

  const std::size_t n = dims.count();
  const auto payload = static_cast<std::size_t>(vox_offset);
  const std::size_t need = n * static_cast<std::size_t>(bytes_per_voxel(type));
  if (bytes.size() < payload || bytes.size() - payload < need) {
    throw Error(ErrorCode::Truncated, context + ": payload shorter than " + std::to_string(need) + " bytes");
  }
  r.seek(payload);
  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    float v = 0.0f;
    switch (type) {
      case Datatype::UInt8: v = static_cast<float>(r.get<std::uint8_t>()); break;
      case Datatype::Int16: v = static_cast<float>(r.get<std::int16_t>()); break;
      case Datatype::Float32: v = r.get<float>(); break;
    }
    data[i] = scaled ? v * slope + inter : v;
  }
  return Volume3D(dims, spacing, std::move(data));
}

inline Volume3D read_nifti(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode(bytes, path.string());
}

/// Encodes a volume as float32 (or uint8 when every value is an exact byte and
/// `datatype` asks for it).
inline std::vector<char> encode(const Volume3D& vol, Datatype datatype = Datatype::Float32) {
  if (datatype == Datatype::Int16) {
    throw Error(ErrorCode::UnsupportedDatatype, "int16 output is not supported");
  }
  ByteWriter w;
  w.put<std::int32_t>(kHeaderSize);
  w.pad_to(offset::dim);
  const Dims& d = vol.dims();
  const std::int16_t dim[8] = {3, static_cast<std::int16_t>(d.nx), static_cast<std::int16_t>(d.ny),
                               static_cast<std::int16_t>(d.nz), 1, 1, 1, 1};
  if (d.nx > 32767 || d.ny > 32767 || d.nz > 32767) {
    throw Error(ErrorCode::BadDimension, "extent does not fit in int16");
  }
  for (auto v : dim) w.put(v);
  w.pad_to(offset::datatype);
  w.put(static_cast<std::int16_t>(datatype));
  w.put(static_cast<std::int16_t>(bytes_per_voxel(datatype) * 8));
  w.pad_to(offset::pixdim);
  const float pixdim[8] = {1.0f, vol.spacing().sx, vol.spacing().sy, vol.spacing().sz, 0, 0, 0, 0};
  for (auto v : pixdim) w.put(v);
  w.put(static_cast<float>(kDefaultVoxOffset));
  w.put(1.0f);  // scl_slope
  w.put(0.0f);  // scl_inter
  w.pad_to(offset::xyzt_units);
  w.put<std::uint8_t>(2);  // mm
  w.pad_to(offset::magic);
  w.put_bytes(std::string_view("n+1\0", 4));
  w.pad_to(kDefaultVoxOffset);

  if (datatype == Datatype::Float32) {
    w.put_span(vol.data());
  } else {
    for (float v : vol.data()) {
      if (v < 0.0f || v > 255.0f || v != std::floor(v)) {
        throw Error(ErrorCode::UnsupportedDatatype, "value not representable as uint8");
      }
      w.put(static_cast<std::uint8_t>(v));
    }
  }
  return std::move(w.bytes());
}

inline void write_nifti(const Volume3D& vol, const std::filesystem::path& path,
                        Datatype datatype = Datatype::Float32) {
  atomic_write_file(path, encode(vol, datatype));
}

inline void write_labels(const LabelVolume& labels, const std::filesystem::path& path) {
  write_nifti(to_volume(labels), path, Datatype::UInt8);
}

inline LabelVolume read_labels(const std::filesystem::path& path) { return to_labels(read_nifti(path)); }

}  // namespace tumorseg::nifti

namespace tumorseg {
using nifti::read_nifti;
using nifti::write_nifti;
}  // namespace tumorseg
