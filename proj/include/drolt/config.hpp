// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace drolt {

/// Documentation entry for one configuration key.
struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string description;
};

/// The full schema, in documentation order.
const std::vector<ConfigKey>& config_schema();

inline constexpr int kConfigSchemaVersion = 1;

/// Flat, namespaced key/value configuration ("data.beta = 100").
///
/// Every key has a default; files and overrides replace individual values. Unknown keys and
/// malformed values are collected and reported together by validate().
class RunConfig {
 public:
  RunConfig();  // all defaults

  /// "key = value" lines; '#' starts a comment. Throws ValidationError listing every problem.
  static RunConfig parse(std::istream& is, std::string_view origin = "<config>");
  static RunConfig load(const std::string& path);
  /// Like parse() but leaves validation to the caller (problems are kept).
  static RunConfig read(std::istream& is, std::string_view origin = "<config>");

  /// Records an unknown key as a problem instead of throwing; see validate().
  void set(std::string_view key, std::string_view value);
  bool has_key(std::string_view key) const;
  const std::string& get(std::string_view key) const;

  /// Every problem found, empty when the configuration is usable.
  std::vector<std::string> problems() const;
  /// Throws ValidationError when problems() is nonempty.
  void validate() const;

  double real(std::string_view key) const;
  long long integer(std::string_view key) const;
  std::uint64_t u64(std::string_view key) const;
  bool boolean(std::string_view key) const;
  std::vector<long long> int_list(std::string_view key) const;

  /// Canonical "key = value" text, sorted by key, ending with a newline.
  std::string to_text() const;
  /// FNV-1a over to_text(), as 16 hex digits.
  std::string hash() const;

  const std::map<std::string, std::string, std::less<>>& values() const { return values_; }

 private:
  std::map<std::string, std::string, std::less<>> values_;
  std::vector<std::string> parse_problems_;
};

}  // namespace drolt
