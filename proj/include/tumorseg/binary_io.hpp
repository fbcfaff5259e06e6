#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <unistd.h>
#include <vector>

#include "tumorseg/error.hpp"

namespace tumorseg {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian and written with memcpy");

/// Append-only little-endian encoder.
class ByteWriter {
 public:
  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    const auto offset = bytes_.size();
    bytes_.resize(offset + sizeof(T));
    std::memcpy(bytes_.data() + offset, &value, sizeof(T));
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void put_span(std::span<const T> values) {
    const auto offset = bytes_.size();
    bytes_.resize(offset + values.size_bytes());
    if (!values.empty()) std::memcpy(bytes_.data() + offset, values.data(), values.size_bytes());
  }

  void put_bytes(std::string_view raw) {
    bytes_.insert(bytes_.end(), raw.begin(), raw.end());
  }

  void pad_to(std::size_t size) {
    if (bytes_.size() < size) bytes_.resize(size, '\0');
  }

  std::vector<char>& bytes() { return bytes_; }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

/// Bounds-checked little-endian decoder; running off the end is a Truncated error.
class ByteReader {
 public:
  explicit ByteReader(std::span<const char> bytes, std::string context = "input")
      : bytes_(bytes), context_(std::move(context)) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    require(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void get_span(std::span<T> out) {
    require(out.size_bytes());
    if (!out.empty()) std::memcpy(out.data(), bytes_.data() + pos_, out.size_bytes());
    pos_ += out.size_bytes();
  }

  std::string get_string(std::size_t n) {
    require(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  void seek(std::size_t pos) {
    if (pos > bytes_.size()) throw Error(ErrorCode::Truncated, context_ + ": seek past end");
    pos_ = pos;
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void require(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorCode::Truncated, context_ + ": unexpected end of data");
    }
  }

  std::span<const char> bytes_;
  std::size_t pos_ = 0;
  std::string context_;
};

inline std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<char> bytes(size);
  if (size > 0 && !in.read(bytes.data(), static_cast<std::streamsize>(size))) {
    throw Error(ErrorCode::Io, "cannot read " + path.string());
  }
  return bytes;
}

/// Writes to a sibling temp file and renames it into place, so readers never
/// observe a partially written file.
inline void atomic_write_file(const std::filesystem::path& path, std::span<const char> bytes) {
  auto tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    if (!bytes.empty()) out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error(ErrorCode::Io, "write failed for " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::Io, "cannot rename into " + path.string());
  }
}

inline void atomic_write_text(const std::filesystem::path& path, std::string_view text) {
  atomic_write_file(path, std::span<const char>(text.data(), text.size()));
}

}  // namespace tumorseg
