// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace drolt::textio {

/// 17 significant digits: parses back to the identical double.
std::string exact(double x);
/// Compact form for human-facing CSV columns.
std::string brief(double x);

std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);
std::optional<std::uint64_t> parse_u64(std::string_view s);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 1469598103934665603ULL);
std::string hex64(std::uint64_t v);

/// Line-oriented reader that tracks positions for ParseError.
class LineReader {
 public:
  explicit LineReader(std::istream& is) : is_(is) {}

  /// Next line, or nullopt at end of input.
  std::optional<std::string> next();
  /// Next line; throws ParseError("unexpected end of file ...") at end of input.
  std::string expect(std::string_view what);
  /// Next line split as "<key> <values...>"; throws unless the first token equals key.
  std::vector<std::string> expect_record(std::string_view key, std::size_t value_count);

  [[noreturn]] void fail(const std::string& what) const;

  std::size_t line() const { return line_; }
  std::size_t offset() const { return line_offset_; }
  /// Bytes consumed so far, i.e. the offset of the next line.
  std::size_t consumed() const { return next_offset_; }

 private:
  std::istream& is_;
  std::size_t line_ = 0;
  std::size_t line_offset_ = 0;
  std::size_t next_offset_ = 0;
};

std::vector<std::string> tokens(std::string_view line);

}  // namespace drolt::textio
