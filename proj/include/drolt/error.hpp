// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace drolt {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operands whose dimensions disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A numeric argument outside its documented domain (negative radius, sigma <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A class id, centroid, or key that is not present.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// An operation invoked out of order (backward before forward, stage 2 without a bank).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or gradient during training.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents. Carries the 1-based line and the byte offset of that line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t offset)
      : Error(what + " (line " + std::to_string(line) + ", offset " + std::to_string(offset) + ")"),
        line_(line),
        offset_(offset) {}

  std::size_t line() const { return line_; }
  std::size_t offset() const { return offset_; }

 private:
  std::size_t line_;
  std::size_t offset_;
};

/// File written by an unsupported format version.
class VersionError : public Error {
 public:
  using Error::Error;
};

/// Checksum mismatch in a checkpoint.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// One or more configuration problems, all collected before any work starts.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& problems) {
    std::string out = "invalid configuration:";
    for (const auto& p : problems) out += "\n  - " + p;
    return out;
  }

  std::vector<std::string> problems_;
};

}  // namespace drolt
