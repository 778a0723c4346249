#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmem {

/// Invalid or missing configuration field. what() names the field as "section.key".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Plain-text key/value configuration with [sections]. Keys outside any section
/// live in the "" section. Parsing is delegated to Boost.PropertyTree's INI reader.
class IniConfig {
 public:
  IniConfig() = default;

  static IniConfig from_file(const std::string& path);
  static IniConfig from_string(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;
  std::optional<std::string> raw(const std::string& section, const std::string& key) const;

  std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& section, const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  /// Comma separated integers, e.g. "256,64,16,0".
  std::vector<std::int64_t> get_int_list(const std::string& section, const std::string& key,
                                         const std::vector<std::int64_t>& fallback) const;

  std::string require_string(const std::string& section, const std::string& key) const;

  void set(const std::string& section, const std::string& key, const std::string& value);

  std::vector<std::string> sections() const;
  const std::map<std::string, std::string>* section(const std::string& name) const;

  /// Sorted "section.key=value" lines; stable across key order in the source file.
  std::string canonical() const;
  std::uint64_t digest() const;

 private:
  std::map<std::string, std::map<std::string, std::string>> data_;
};

}  // namespace hmem
