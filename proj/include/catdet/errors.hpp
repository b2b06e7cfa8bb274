#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace catdet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents that do not fit the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An argument outside the operation's domain (counts, radii, indices, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity appeared where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Degenerate geometry, e.g. projecting a point that sits on the camera plane.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// The finite-difference oracle hit a non-finite probe.
class OracleError : public Error {
 public:
  OracleError(const std::string& what, std::size_t coordinate)
      : Error(what + " (coordinate " + std::to_string(coordinate) + ")"), coordinate_(coordinate) {}
  std::size_t coordinate() const noexcept { return coordinate_; }

 private:
  std::size_t coordinate_;
};

/// Malformed input text or bytes. Line and field are 1-based; 0 means "not applicable".
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0, std::size_t field = 0)
      : Error(format(what, line, field)), line_(line), field_(field) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t field() const noexcept { return field_; }

 private:
  static std::string format(const std::string& what, std::size_t line, std::size_t field) {
    std::string out;
    if (line > 0) out += "line " + std::to_string(line) + ": ";
    if (field > 0) out += "field " + std::to_string(field) + ": ";
    return out + what;
  }
  std::size_t line_;
  std::size_t field_;
};

}  // namespace catdet
