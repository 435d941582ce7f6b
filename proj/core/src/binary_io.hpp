#pragma once

// Little-endian primitive readers/writers shared by the EMB1 and MTH1 codecs.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "embrec/error.hpp"

namespace embrec::detail {

std::vector<std::byte> read_file_bytes(const std::string& path);

/// Writes to `path + ".tmp"` and renames over `path`.
void write_file_atomically(const std::string& path, std::span<const std::byte> bytes);

class ByteWriter {
 public:
  void put_bytes(std::string_view s);
  void put_u8(std::uint8_t v);
  void put_u16(std::uint16_t v);
  void put_u32(std::uint32_t v);
  void put_f32(float v);
  void put_f64(double v);

  std::span<const std::byte> bytes() const { return buffer_; }

 private:
  template <typename T>
  void put_le(T v);

  std::vector<std::byte> buffer_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::byte> data, std::string source)
      : data_(data), source_(std::move(source)) {}

  std::uint64_t offset() const noexcept { return offset_; }
  std::uint64_t remaining() const noexcept { return data_.size() - offset_; }
  bool at_end() const noexcept { return offset_ == data_.size(); }

  std::string take_string(std::size_t length, std::string_view what);
  std::uint8_t take_u8(std::string_view what);
  std::uint16_t take_u16(std::string_view what);
  std::uint32_t take_u32(std::string_view what);
  float take_f32(std::string_view what);
  double take_f64(std::string_view what);

  [[noreturn]] void fail(const std::string& message) const;
  [[noreturn]] void fail_at(std::uint64_t offset, const std::string& message) const;

 private:
  template <typename T>
  T take_le(std::string_view what);
  void require(std::size_t n, std::string_view what) const;

  std::span<const std::byte> data_;
  std::string source_;
  std::uint64_t offset_ = 0;
};

}  // namespace embrec::detail
