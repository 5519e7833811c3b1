#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "viosched/errors.hpp"

namespace viosched {

// Flat key-value configuration with dotted keys. Files are UTF-8, one
// `key = value` per line; a `[section]` line prefixes the keys that follow
// ("[policy]" + "chi_T = 70" means "policy.chi_T"). '#' starts a comment.
// Later assignments win, which is how file -> CLI-flag precedence works.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
      throw FileNotFoundError("config file not found: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    Config cfg;
    cfg.parse(ss.str(), path.string());
    return cfg;
  }

  static Config from_string(const std::string& text) {
    Config cfg;
    cfg.parse(text, "<string>");
    return cfg;
  }

  void parse(const std::string& text, const std::string& origin) {
    std::string section;
    long line_no = 0;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      std::string s = strip_comment(line);
      s = trim(s);
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']')
          throw MalformedRowError(origin + ": unterminated section header", line_no);
        section = trim(s.substr(1, s.size() - 2));
        continue;
      }
      auto eq = s.find('=');
      if (eq == std::string::npos)
        throw MalformedRowError(origin + ": expected 'key = value'", line_no);
      std::string key = trim(s.substr(0, eq));
      std::string value = trim(s.substr(eq + 1));
      if (key.empty())
        throw MalformedRowError(origin + ": empty key", line_no);
      if (!section.empty()) key = section + "." + key;
      values_[key] = value;
    }
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_str(const std::string& key, const std::string& def = "") const {
    auto it = values_.find(key);
    return it == values_.end() ? def : it->second;
  }

  std::optional<std::string> find(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  double get_double(const std::string& key, double def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    return parse_double(key, it->second);
  }

  long get_int(const std::string& key, long def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    return parse_int(key, it->second);
  }

  bool get_bool(const std::string& key, bool def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "': expected boolean, got '" + v + "'");
  }

  // Comma-separated integer list, e.g. "monitor.cores = 0,1".
  std::vector<int> get_int_list(const std::string& key, std::vector<int> def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    std::vector<int> out;
    std::istringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      out.push_back(static_cast<int>(parse_int(key, item)));
    }
    return out;
  }

  // Merge other over this (other wins).
  void overlay(const Config& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
  }

  const std::map<std::string, std::string>& items() const { return values_; }

  // Deterministic flat rendering, used for run-log header snapshots.
  std::string snapshot() const {
    std::string out;
    for (const auto& [k, v] : values_) {
      out += k;
      out += " = ";
      out += v;
      out += '\n';
    }
    return out;
  }

  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

 private:
  static std::string strip_comment(const std::string& s) {
    auto pos = s.find('#');
    return pos == std::string::npos ? s : s.substr(0, pos);
  }

  static double parse_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    double d = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
      throw ConfigError("config key '" + key + "': expected number, got '" + v + "'");
    return d;
  }

  static long parse_int(const std::string& key, const std::string& v) {
    char* end = nullptr;
    long n = std::strtol(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
      throw ConfigError("config key '" + key + "': expected integer, got '" + v + "'");
    return n;
  }

  std::map<std::string, std::string> values_;
};

}  // namespace viosched
