#include "hmem/common/ini.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <sstream>

#include "hmem/common/digest.hpp"

namespace hmem {

namespace {

std::string field_name(const std::string& section, const std::string& key) {
  return section.empty() ? key : section + "." + key;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

IniConfig from_ptree(const boost::property_tree::ptree& tree) {
  IniConfig cfg;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      cfg.set("", name, trim(node.data()));
      continue;
    }
    for (const auto& [key, leaf] : node) cfg.set(name, key, trim(leaf.data()));
  }
  return cfg;
}

}  // namespace

IniConfig IniConfig::from_file(const std::string& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(path, e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  return from_ptree(tree);
}

IniConfig IniConfig::from_string(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("<string>", e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  return from_ptree(tree);
}

bool IniConfig::has(const std::string& section, const std::string& key) const {
  return raw(section, key).has_value();
}

std::optional<std::string> IniConfig::raw(const std::string& section, const std::string& key) const {
  const auto s = data_.find(section);
  if (s == data_.end()) return std::nullopt;
  const auto k = s->second.find(key);
  if (k == s->second.end()) return std::nullopt;
  return k->second;
}

std::string IniConfig::get_string(const std::string& section, const std::string& key,
                                  const std::string& fallback) const {
  return raw(section, key).value_or(fallback);
}

double IniConfig::get_double(const std::string& section, const std::string& key, double fallback) const {
  const auto v = raw(section, key);
  if (!v) return fallback;
  try {
    std::size_t pos = 0;
    const double d = std::stod(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw ConfigError(field_name(section, key), "expected a number, got '" + *v + "'");
  }
}

std::int64_t IniConfig::get_int(const std::string& section, const std::string& key, std::int64_t fallback) const {
  const auto v = raw(section, key);
  if (!v) return fallback;
  std::int64_t out = 0;
  const auto* end = v->data() + v->size();
  const auto res = std::from_chars(v->data(), end, out);
  if (res.ec != std::errc{} || res.ptr != end)
    throw ConfigError(field_name(section, key), "expected an integer, got '" + *v + "'");
  return out;
}

bool IniConfig::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  const auto v = raw(section, key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw ConfigError(field_name(section, key), "expected a boolean, got '" + *v + "'");
}

std::vector<std::int64_t> IniConfig::get_int_list(const std::string& section, const std::string& key,
                                                  const std::vector<std::int64_t>& fallback) const {
  const auto v = raw(section, key);
  if (!v) return fallback;
  std::vector<std::int64_t> out;
  std::stringstream ss(*v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    std::int64_t x = 0;
    const auto* end = item.data() + item.size();
    const auto res = std::from_chars(item.data(), end, x);
    if (item.empty() || res.ec != std::errc{} || res.ptr != end)
      throw ConfigError(field_name(section, key), "expected comma separated integers, got '" + *v + "'");
    out.push_back(x);
  }
  return out;
}

std::string IniConfig::require_string(const std::string& section, const std::string& key) const {
  const auto v = raw(section, key);
  if (!v) throw ConfigError(field_name(section, key), "required field is missing");
  return *v;
}

void IniConfig::set(const std::string& section, const std::string& key, const std::string& value) {
  data_[section][key] = value;
}

std::vector<std::string> IniConfig::sections() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : data_) out.push_back(name);
  return out;
}

const std::map<std::string, std::string>* IniConfig::section(const std::string& name) const {
  const auto it = data_.find(name);
  return it == data_.end() ? nullptr : &it->second;
}

std::string IniConfig::canonical() const {
  std::string out;
  for (const auto& [s, kv] : data_)
    for (const auto& [k, v] : kv) out += field_name(s, k) + "=" + v + "\n";
  return out;
}

std::uint64_t IniConfig::digest() const { return fnv1a64(canonical()); }

}  // namespace hmem
