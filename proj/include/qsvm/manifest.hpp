#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "qsvm/io.hpp"

namespace qsvm {

constexpr const char* kToolVersion = "qsvmlab 1.0.0";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat `key = value` configuration. '#' starts a comment; blank lines are
// ignored. Values keep their textual form until a typed getter is called.
class Config {
 public:
  Config() = default;
  explicit Config(std::map<std::string, std::string> values) : values_(std::move(values)) {}

  static Config parse_text(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      const std::string stripped = trim(line);
      if (stripped.empty()) continue;
      const auto eq = stripped.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
      const std::string key = trim(stripped.substr(0, eq));
      const std::string value = trim(stripped.substr(eq + 1));
      if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static Config parse_file(const std::filesystem::path& path) {
    return parse_text(read_file(path));
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  const std::string& raw(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
    return it->second;
  }

  double get_double(const std::string& key) const { return parse_double(raw(key)); }
  std::int64_t get_int(const std::string& key) const {
    return static_cast<std::int64_t>(parse_double(raw(key)));
  }
  std::uint64_t get_u64(const std::string& key) const {
    const std::string& s = raw(key);
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': expected unsigned integer, got '" + s + "'");
    }
  }
  std::string get_string(const std::string& key) const { return raw(key); }
  bool get_bool(const std::string& key) const {
    const std::string& s = raw(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("config key '" + key + "': expected boolean, got '" + s + "'");
  }

  std::vector<double> get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& f : split_csv_line(raw(key)))
      if (!f.empty()) out.push_back(parse_double(f));
    if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
    return out;
  }
  std::vector<std::uint64_t> get_u64_list(const std::string& key) const {
    std::vector<std::uint64_t> out;
    for (double v : get_double_list(key)) out.push_back(static_cast<std::uint64_t>(v));
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

  // Overlay user values onto schema defaults; keys outside the schema are
  // rejected so typos surface immediately.
  static Config resolve(const std::map<std::string, std::string>& defaults, const Config& user,
                        const std::string& context) {
    Config out{defaults};
    for (const auto& [key, value] : user.values()) {
      if (!out.has(key))
        throw ConfigError("unknown config key '" + key + "' for " + context);
      out.set(key, value);
    }
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
};

// Written alongside every output set: enough to reproduce the run exactly.
struct RunManifest {
  std::string command;
  std::string name;  // experiment or subcommand qualifier
  std::map<std::string, std::string> config;
  std::uint64_t master_seed = 0;
  std::string tool_version = kToolVersion;
  double wall_clock_seconds = 0.0;
  std::vector<std::string> outputs;
};

inline void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
  nlohmann::json j;
  j["command"] = m.command;
  j["name"] = m.name;
  j["config"] = m.config;
  j["master_seed"] = m.master_seed;
  j["tool_version"] = m.tool_version;
  j["wall_clock_seconds"] = m.wall_clock_seconds;
  j["outputs"] = m.outputs;
  write_file_atomic(path, j.dump(2) + "\n");
}

inline RunManifest load_manifest(const std::filesystem::path& path) {
  const nlohmann::json j = nlohmann::json::parse(read_file(path));
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.name = j.at("name").get<std::string>();
  m.config = j.at("config").get<std::map<std::string, std::string>>();
  m.master_seed = j.at("master_seed").get<std::uint64_t>();
  m.tool_version = j.at("tool_version").get<std::string>();
  m.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  m.outputs = j.at("outputs").get<std::vector<std::string>>();
  return m;
}

}  // namespace qsvm
