// Copyright 2026 The strgg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "strgg/data/trajectory.hpp"
#include "strgg/numerics/errors.hpp"

namespace strgg {

namespace detail {
inline std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}
}  // namespace detail

/// Flat `key = value` text with '#' comments. Lookups consult the
/// environment first: key "train.lr" is overridden by STRGG_TRAIN_LR.
class KeyValueConfig {
 public:
  static constexpr const char* kEnvPrefix = "STRGG_";

  KeyValueConfig() = default;

  static KeyValueConfig parse(const std::string& text, const std::string& origin = "<config>") {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw FormatError(detail::concat(origin, ":", lineno, ": expected 'key = value'"));
      }
      std::string key = detail::trim(line.substr(0, eq));
      if (key.empty()) throw FormatError(detail::concat(origin, ":", lineno, ": empty key"));
      cfg.values_[key] = detail::trim(line.substr(eq + 1));
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    KeyValueConfig cfg = parse(ss.str(), path);
    const auto slash = path.find_last_of('/');
    cfg.base_dir_ = slash == std::string::npos ? "." : path.substr(0, slash);
    return cfg;
  }

  static std::string env_name(const std::string& key) {
    std::string n = kEnvPrefix;
    for (char c : key) {
      n += std::isalnum(static_cast<unsigned char>(c))
               ? static_cast<char>(std::toupper(static_cast<unsigned char>(c)))
               : '_';
    }
    return n;
  }

  std::optional<std::string> find(const std::string& key) const {
    if (const char* env = std::getenv(env_name(key).c_str())) return std::string(env);
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  bool has(const std::string& key) const { return find(key).has_value(); }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    return find(key).value_or(fallback);
  }
  std::string require_string(const std::string& key) const {
    auto v = find(key);
    if (!v) throw UsageError("config: missing required key '" + key + "'");
    return *v;
  }

  double get_double(const std::string& key, double fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    double d = 0.0;
    if (!detail::parse_double(*v, d)) {
      throw FormatError("config: '" + key + "' is not a number: '" + *v + "'");
    }
    return d;
  }

  long long get_int(const std::string& key, long long fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    std::int64_t i = 0;
    if (!detail::parse_id(*v, i)) {
      throw FormatError("config: '" + key + "' is not an integer: '" + *v + "'");
    }
    return i;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw FormatError("config: '" + key + "' is not a boolean: '" + *v + "'");
  }

  /// Comma-separated list, entries trimmed, empties dropped.
  std::vector<std::string> get_list(const std::string& key) const {
    std::vector<std::string> out;
    auto v = find(key);
    if (!v) return out;
    std::stringstream ss(*v);
    for (std::string item; std::getline(ss, item, ',');) {
      item = detail::trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  /// Relative paths resolve against the config file's directory.
  std::string resolve_path(const std::string& p) const {
    if (p.empty() || p.front() == '/' || base_dir_.empty()) return p;
    return base_dir_ + "/" + p;
  }

  /// File values with environment overrides applied, in key order.
  std::map<std::string, std::string> snapshot() const {
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : values_) out[k] = *find(k);
    return out;
  }

  /// Renders the snapshot back to `key = value` text.
  std::string to_text() const {
    std::string s;
    for (const auto& [k, v] : snapshot()) s += k + " = " + v + "\n";
    return s;
  }

 private:
  std::map<std::string, std::string> values_;
  std::string base_dir_;
};

}  // namespace strgg
