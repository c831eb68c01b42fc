#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltrv/networks.hpp"
#include "ltrv/training.hpp"

namespace ltrv {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` settings. Accepts the TOML subset of bare keys, numbers,
/// booleans, quoted strings and `#` comments; tables and arrays are rejected.
class Config {
 public:
  static Config parse(std::istream& in, const std::string& source = "<config>");
  static Config load(const std::filesystem::path& path);
  /// Parses "key=value" as given on the command line.
  void set_from_arg(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Throws ConfigError naming the first key not in `known`.
  void require_known(const std::vector<std::string>& known) const;
  /// Sorted `key = value` lines.
  std::string dump() const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Keys understood by train_config_from / arch_config_from.
const std::vector<std::string>& training_config_keys();
TrainConfig train_config_from(const Config& config, TrainConfig base);
ArchConfig arch_config_from(const Config& config, ArchConfig base);
/// The training keys with the values in `t` and `a`.
Config to_config(const TrainConfig& t, const ArchConfig& a);
/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace ltrv
