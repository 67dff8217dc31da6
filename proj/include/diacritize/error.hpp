#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace diacritize {

/// Bad user input: missing files, malformed data, invalid arguments.
/// The CLI maps this family to exit code 2.
class InputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A dataset or config file violated its line format.
class FormatError : public InputError {
public:
  using InputError::InputError;
};

/// Malformed XML; carries the byte offset reported by the parser.
class ParseError : public InputError {
public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : InputError(what + " (at byte " + std::to_string(byte_offset) + ")"),
        offset_(byte_offset) {}

  std::size_t byte_offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

/// Non-conforming matrix shapes.
class ShapeError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// Non-finite values or other numerical breakdown.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace diacritize
