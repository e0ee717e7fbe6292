#pragma once

#include "lawsde/types.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace lawsde {

/// Raised for malformed, missing or unknown configuration keys.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Flat `key = value` configuration. `#` starts a comment; blank lines are
/// ignored; keys may not repeat.
class Config {
 public:
  static Config parse(std::istream& is, const std::string& source = "<config>");
  static Config load(const std::filesystem::path& path);

  /// Throws ConfigError naming the first key not in `allowed`.
  void reject_unknown(const std::set<std::string>& allowed) const;

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::string string(const std::string& key) const;
  std::string string(const std::string& key, const std::string& fallback) const;
  double number(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  std::uint64_t unsigned_integer(const std::string& key) const;
  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  /// Comma-separated numbers.
  std::vector<double> numbers(const std::string& key) const;
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const;

  const std::map<std::string, std::string>& entries() const { return values_; }
  /// One `key = value` line per entry, sorted by key.
  std::string serialize() const;

 private:
  std::map<std::string, std::string> values_;
  std::string source_;
};

}  // namespace lawsde
