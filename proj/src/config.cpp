#include "ltrv/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace ltrv {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& k) {
  return !k.empty() && std::all_of(k.begin(), k.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

// Strips a trailing comment outside quotes and unquotes string values.
std::string parse_value(const std::string& raw, const std::string& where) {
  std::string v = trim(raw);
  if (v.empty()) throw ConfigError(where + ": missing value");
  if (v[0] == '"') {
    const auto close = v.find('"', 1);
    if (close == std::string::npos) throw ConfigError(where + ": unterminated string");
    const std::string rest = trim(v.substr(close + 1));
    if (!rest.empty() && rest[0] != '#') throw ConfigError(where + ": trailing text after string");
    return v.substr(1, close - 1);
  }
  const auto hash = v.find('#');
  if (hash != std::string::npos) v = trim(v.substr(0, hash));
  if (v.empty()) throw ConfigError(where + ": missing value");
  if (v[0] == '[' || v[0] == '{') throw ConfigError(where + ": arrays and inline tables are not supported");
  return v;
}

}  // namespace

Config Config::parse(std::istream& in, const std::string& source) {
  Config c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = source + ":" + std::to_string(lineno);
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t[0] == '[') throw ConfigError(where + ": tables are not supported (flat keys only)");
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    if (!valid_key(key)) throw ConfigError(where + ": bad key '" + key + "'");
    if (c.has(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    c.values_[key] = parse_value(t.substr(eq + 1), where);
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse(in, path.string());
}

void Config::set_from_arg(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), parse_value(assignment.substr(eq + 1), "--set " + assignment));
}

void Config::set(const std::string& key, const std::string& value) {
  if (!valid_key(key)) throw ConfigError("bad key '" + key + "'");
  values_[key] = value;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::istringstream in(it->second);
  double v = 0.0;
  in >> v;
  if (in.fail() || !in.eof()) throw ConfigError("key '" + key + "': expected a number, got '" + it->second + "'");
  return v;
}

long long Config::get_int(const std::string& key, long long fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  long long v = 0;
  const std::string& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + s + "'");
  }
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true") return true;
  if (it->second == "false") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + it->second + "'");
}

void Config::require_known(const std::vector<std::string>& known) const {
  for (const auto& [k, v] : values_)
    if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError("unknown config key '" + k + "'");
}

std::string Config::dump() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    // Quote anything that would not read back as a bare value.
    const bool bare = !v.empty() && v.find_first_of("#\" \t") == std::string::npos && v[0] != '[' && v[0] != '{';
    out += k + " = " + (bare ? v : "\"" + v + "\"") + "\n";
  }
  return out;
}

const std::vector<std::string>& training_config_keys() {
  static const std::vector<std::string> keys{
      "epochs", "inner_steps", "beta",    "alpha",         "alpha_l", "sigma_e", "lr",     "batch_size",
      "lambda", "huber_delta", "explore", "explore_sigma", "seed",    "zdim",    "hidden", "log_timing"};
  return keys;
}

TrainConfig train_config_from(const Config& c, TrainConfig t) {
  auto count = [&](const char* key, std::size_t fallback) {
    const long long v = c.get_int(key, static_cast<long long>(fallback));
    if (v < 0) throw ConfigError(std::string("key '") + key + "' must be >= 0");
    return static_cast<std::size_t>(v);
  };
  t.epochs = count("epochs", t.epochs);
  t.inner_steps = count("inner_steps", t.inner_steps);
  t.batch_size = count("batch_size", t.batch_size);
  t.beta = c.get_double("beta", t.beta);
  t.alpha = c.get_double("alpha", t.alpha);
  t.alpha_l = c.get_double("alpha_l", t.alpha_l);
  t.sigma_e = c.get_double("sigma_e", t.sigma_e);
  t.adam.lr = c.get_double("lr", t.adam.lr);
  t.lambda = c.get_double("lambda", t.lambda);
  t.huber_delta = c.get_double("huber_delta", t.huber_delta);
  t.explore = c.get_bool("explore", t.explore);
  t.explore_sigma = c.get_double("explore_sigma", t.explore_sigma);
  t.seed = static_cast<std::uint64_t>(count("seed", t.seed));
  t.log_timing = c.get_bool("log_timing", t.log_timing);
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return t;
}

ArchConfig arch_config_from(const Config& c, ArchConfig a) {
  const long long zdim = c.get_int("zdim", static_cast<long long>(a.zdim));
  const long long hidden = c.get_int("hidden", static_cast<long long>(a.hidden));
  if (zdim < 1 || hidden < 1) throw ConfigError("zdim and hidden must be >= 1");
  a.zdim = static_cast<std::size_t>(zdim);
  a.hidden = static_cast<std::size_t>(hidden);
  return a;
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

Config to_config(const TrainConfig& t, const ArchConfig& a) {
  Config c;
  c.set("epochs", std::to_string(t.epochs));
  c.set("inner_steps", std::to_string(t.inner_steps));
  c.set("batch_size", std::to_string(t.batch_size));
  c.set("beta", format_double(t.beta));
  c.set("alpha", format_double(t.alpha));
  c.set("alpha_l", format_double(t.alpha_l));
  c.set("sigma_e", format_double(t.sigma_e));
  c.set("lr", format_double(t.adam.lr));
  c.set("lambda", format_double(t.lambda));
  c.set("huber_delta", format_double(t.huber_delta));
  c.set("explore", t.explore ? "true" : "false");
  c.set("explore_sigma", format_double(t.explore_sigma));
  c.set("seed", std::to_string(t.seed));
  c.set("log_timing", t.log_timing ? "true" : "false");
  c.set("zdim", std::to_string(a.zdim));
  c.set("hidden", std::to_string(a.hidden));
  return c;
}

}  // namespace ltrv
