// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#include "textio.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "drolt/error.hpp"

namespace drolt::textio {

std::string exact(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string brief(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  std::string tmp(s);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size() || errno == ERANGE) return std::nullopt;
  return v;
}

std::optional<long long> parse_int(std::string_view s) {
  s = trim(s);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::optional<std::uint64_t> parse_u64(std::string_view s) {
  s = trim(s);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t h) {
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::vector<std::string> tokens(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t b = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > b) out.emplace_back(line.substr(b, i - b));
  }
  return out;
}

std::optional<std::string> LineReader::next() {
  std::string s;
  if (!std::getline(is_, s)) return std::nullopt;
  ++line_;
  line_offset_ = next_offset_;
  next_offset_ += s.size() + 1;
  return s;
}

std::string LineReader::expect(std::string_view what) {
  auto s = next();
  if (!s) {
    throw ParseError("unexpected end of file, expected " + std::string(what), line_ + 1, next_offset_);
  }
  return *s;
}

std::vector<std::string> LineReader::expect_record(std::string_view key, std::size_t value_count) {
  const std::string line = expect(key);
  auto toks = tokens(line);
  if (toks.empty() || toks.front() != key) fail("expected record '" + std::string(key) + "'");
  if (toks.size() != value_count + 1) {
    fail("record '" + std::string(key) + "' expects " + std::to_string(value_count) + " values, found " +
         std::to_string(toks.size() - 1));
  }
  toks.erase(toks.begin());
  return toks;
}

void LineReader::fail(const std::string& what) const { throw ParseError(what, line_, line_offset_); }

}  // namespace drolt::textio
