#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace embrec {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input file. Carries the byte offset (binary
/// formats) or 1-based line number (text formats) where parsing failed.
class FormatError : public Error {
 public:
  enum class Location { kByteOffset, kLine };

  FormatError(const std::string& source, Location where, std::uint64_t position,
              const std::string& message);

  const std::string& source() const noexcept { return source_; }
  Location location_kind() const noexcept { return where_; }
  std::uint64_t position() const noexcept { return position_; }

 private:
  std::string source_;
  Location where_;
  std::uint64_t position_;
};

/// A value violates a documented precondition or data invariant.
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Lookup of an identifier (item, user, attribute) that does not exist.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss or gradient.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace embrec
