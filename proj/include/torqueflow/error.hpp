#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace torqueflow {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scene or scenario file rejected. `where` locates the offending element,
/// e.g. "scenarios[1].steps[3]".
class SceneError : public Error {
 public:
  SceneError(std::string where, const std::string& what)
      : Error(where.empty() ? what : where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

/// Wire frame rejected by the codec. `offset` is the byte offset inside the
/// frame where the problem was detected; `frame_length` includes the LF so the
/// caller can skip the bad frame and keep reading.
class ProtocolError : public Error {
 public:
  enum class Kind { kMalformed, kUnknownType, kRange, kMissingField, kUnexpectedField, kOversize };

  ProtocolError(Kind kind, std::size_t offset, std::size_t frame_length, const std::string& what)
      : Error(what + " (byte " + std::to_string(offset) + ")"),
        kind_(kind),
        offset_(offset),
        frame_length_(frame_length) {}

  Kind kind() const noexcept { return kind_; }
  std::size_t offset() const noexcept { return offset_; }
  std::size_t frame_length() const noexcept { return frame_length_; }

 private:
  Kind kind_;
  std::size_t offset_;
  std::size_t frame_length_;
};

/// Malformed event log, report or bundle. `line` is 1-based, 0 when unknown.
class FormatError : public Error {
 public:
  FormatError(std::string source, std::size_t line, const std::string& what)
      : Error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Inputs to scoring that are out of range or inconsistent with each other.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace torqueflow
