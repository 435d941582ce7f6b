#include "binary_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace embrec {

FormatError::FormatError(const std::string& source, Location where, std::uint64_t position,
                         const std::string& message)
    : Error(source + (where == Location::kByteOffset ? ": byte " : ": line ") +
            std::to_string(position) + ": " + message),
      source_(source),
      where_(where),
      position_(position) {}

}  // namespace embrec

namespace embrec::detail {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

std::vector<std::byte> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open file: " + path);
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> out(raw.size());
  if (!raw.empty()) std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

void write_file_atomically(const std::string& path, std::span<const std::byte> bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open file for writing: " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

template <typename T>
void ByteWriter::put_le(T v) {
  std::array<std::byte, sizeof(T)> raw;
  std::memcpy(raw.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(raw.begin(), raw.end());
  }
  buffer_.insert(buffer_.end(), raw.begin(), raw.end());
}

void ByteWriter::put_bytes(std::string_view s) {
  for (char c : s) buffer_.push_back(static_cast<std::byte>(c));
}
void ByteWriter::put_u8(std::uint8_t v) { put_le(v); }
void ByteWriter::put_u16(std::uint16_t v) { put_le(v); }
void ByteWriter::put_u32(std::uint32_t v) { put_le(v); }
void ByteWriter::put_f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }
void ByteWriter::put_f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }

void ByteReader::require(std::size_t n, std::string_view what) const {
  if (remaining() < n) {
    fail("truncated payload: need " + std::to_string(n) + " bytes for " + std::string(what) +
         ", " + std::to_string(remaining()) + " remain");
  }
}

template <typename T>
T ByteReader::take_le(std::string_view what) {
  require(sizeof(T), what);
  std::array<std::byte, sizeof(T)> raw;
  std::memcpy(raw.data(), data_.data() + offset_, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(raw.begin(), raw.end());
  }
  offset_ += sizeof(T);
  T v;
  std::memcpy(&v, raw.data(), sizeof(T));
  return v;
}

std::string ByteReader::take_string(std::size_t length, std::string_view what) {
  require(length, what);
  std::string s(reinterpret_cast<const char*>(data_.data() + offset_), length);
  offset_ += length;
  return s;
}

std::uint8_t ByteReader::take_u8(std::string_view what) { return take_le<std::uint8_t>(what); }
std::uint16_t ByteReader::take_u16(std::string_view what) { return take_le<std::uint16_t>(what); }
std::uint32_t ByteReader::take_u32(std::string_view what) { return take_le<std::uint32_t>(what); }
float ByteReader::take_f32(std::string_view what) {
  return std::bit_cast<float>(take_le<std::uint32_t>(what));
}
double ByteReader::take_f64(std::string_view what) {
  return std::bit_cast<double>(take_le<std::uint64_t>(what));
}

void ByteReader::fail(const std::string& message) const { fail_at(offset_, message); }

void ByteReader::fail_at(std::uint64_t offset, const std::string& message) const {
  throw FormatError(source_, FormatError::Location::kByteOffset, offset, message);
}

}  // namespace embrec::detail
