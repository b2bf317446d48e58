#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fromage {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Run configuration in INI form: top-level `key = value` lines followed by
/// `[section]` blocks, `;` or `#` comments, comma separated lists.
///
/// Every key is checked against a fixed schema at parse time, so a typo is an
/// error rather than a silently ignored setting. Keys are addressed as
/// "section.key" ("key" for top-level ones). Relative paths resolve against
/// the directory holding the config file.
class Config {
 public:
  static Config load(const std::filesystem::path& file);
  static Config parse(std::string_view text, const std::filesystem::path& base_dir = ".");

  bool has(std::string_view key) const;

  std::string get_string(std::string_view key, std::string_view fallback) const;
  std::string require_string(std::string_view key) const;
  double get_double(std::string_view key, double fallback) const;
  long long get_int(std::string_view key, long long fallback) const;
  std::uint64_t get_u64(std::string_view key, std::uint64_t fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;
  std::vector<double> get_doubles(std::string_view key, std::vector<double> fallback) const;
  std::vector<long long> get_ints(std::string_view key, std::vector<long long> fallback) const;
  std::vector<std::string> get_strings(std::string_view key,
                                       std::vector<std::string> fallback) const;
  std::filesystem::path get_path(std::string_view key) const;
  std::vector<std::filesystem::path> get_paths(std::string_view key) const;

  /// Command-line overrides; the key must be in the schema.
  void set(std::string_view key, std::string value);

  /// FNV-1a over the canonical "key=value" listing, stable across runs.
  std::uint64_t hash() const;
  const std::map<std::string, std::string>& entries() const { return entries_; }
  const std::filesystem::path& base_dir() const { return base_dir_; }

  /// Every key the parser accepts.
  static const std::vector<std::string>& schema();

 private:
  std::map<std::string, std::string> entries_;
  std::filesystem::path base_dir_;
};

std::vector<std::string> split_list(std::string_view text);

}  // namespace fromage
