#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cascade {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Tensor / matrix / dataset dimensions do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A serialized artifact could not be decoded.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : Error(what + " (at byte offset " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}

  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

// A serialized artifact carries an unsupported format version.
class VersionError : public Error {
 public:
  using Error::Error;
};

}  // namespace cascade
