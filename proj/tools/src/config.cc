#include "config.h"

#include <charconv>
#include <fstream>
#include <sstream>
#include <utility>

#include "ovb/error.h"
#include "ovb/numeric.h"

namespace ovb::cli {
namespace {

// Key, default. An empty default means "unset".
const std::pair<const char*, const char*> kDefaults[] = {
    // data and nuisances
    {"family", "regression"},
    {"classes", "2"},
    {"form", "glm"},
    {"holdout_frac", "0.3"},
    {"clip_lo", "0.01"},
    {"clip_hi", "100"},
    {"nuisance", "ridge"},
    {"ridge_lambda", ""},
    {"net_width", "100"},
    {"net_max_iters", "2000"},
    {"net_step", "0.1"},
    // sensitivity budget: s, or all of rho_max, cy_max, cd_max
    {"s", "0"},
    {"rho_max", ""},
    {"cy_max", ""},
    {"cd_max", ""},
    {"bootstrap_replicates", "1000"},
    {"level", "0.95"},
    // evaluated model: eta = weights' x + bias
    {"model_weights", ""},
    {"model_bias", ""},
    // optimizer
    {"objective", "dr"},
    {"method", "lbfgs"},
    {"step_size", "1"},
    {"max_iters", "500"},
    {"grad_tol", "1e-8"},
    // sweep
    {"s_grid", ""},
    {"s_grid_max", ""},
    {"s_grid_points", "11"},
    {"benchmark_report", ""},
    // synth
    {"world", "w1"},
    {"n", "1000"},
    {"m", "1000"},
    {"d", "10"},
    {"k", "10"},
    {"coefficients", ""},
    {"omit", ""},
    {"shift", ""},
    {"noise_sd", "0.5"},
    {"delta", "0.5"},
    {"omit_count", "0"},
    {"seed", "0"},
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

bool is_known(const std::string& key) {
  for (const auto& [k, v] : kDefaults) {
    if (key == k) return true;
  }
  return false;
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& origin) {
  Config c;
  c.origin_ = origin;
  for (const auto& [k, v] : kDefaults) c.values_[k] = {v, 0};
  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(raw.substr(0, hash));
    if (body.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line) + ": ";
    const auto eq = body.find('=');
    require(eq != std::string::npos, ErrorKind::kInvalidArgument,
            where + "expected key = value");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    require(!key.empty(), ErrorKind::kInvalidArgument, where + "empty key");
    require(is_known(key), ErrorKind::kInvalidArgument,
            where + "unknown key '" + key + "'");
    if (const auto it = seen.find(key); it != seen.end()) {
      fail(ErrorKind::kInvalidArgument, where + "key '" + key +
                                            "' repeats line " +
                                            std::to_string(it->second));
    }
    seen[key] = line;
    c.values_[key] = {value, line};
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kInvalidArgument,
          path + ": cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

void Config::set(const std::string& key, const std::string& value) {
  require(is_known(key), ErrorKind::kInvalidArgument,
          "unknown config key '" + key + "'");
  values_[key] = {value, 0};
}

const Config::Entry& Config::entry(const std::string& key) const {
  const auto it = values_.find(key);
  require(it != values_.end(), ErrorKind::kInvalidArgument,
          "unknown config key '" + key + "'");
  return it->second;
}

void Config::bad(const std::string& key, const std::string& what) const {
  const int line = entry(key).line;
  const std::string where =
      line > 0 ? origin_ + ":" + std::to_string(line) + ": " : origin_ + ": ";
  fail(ErrorKind::kInvalidArgument, where + "key '" + key + "': " + what);
}

bool Config::has(const std::string& key) const {
  return !entry(key).value.empty();
}

std::string Config::str(const std::string& key) const {
  return entry(key).value;
}

double Config::num(const std::string& key) const {
  const std::string& v = entry(key).value;
  if (v.empty()) bad(key, "value required");
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    bad(key, "expected a number, got '" + v + "'");
  }
  return out;
}

long long Config::integer(const std::string& key) const {
  const std::string& v = entry(key).value;
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    bad(key, "expected an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t Config::seed() const {
  const long long v = integer("seed");
  if (v < 0) bad("seed", "must be non-negative");
  return static_cast<std::uint64_t>(v);
}

std::vector<double> Config::num_list(const std::string& key) const {
  std::vector<double> out;
  const std::string& v = entry(key).value;
  if (v.empty()) return out;
  for (const auto& item : split_commas(v)) {
    double x = 0.0;
    const auto [ptr, ec] =
        std::from_chars(item.data(), item.data() + item.size(), x);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
      bad(key, "expected a comma-separated list of numbers");
    }
    out.push_back(x);
  }
  return out;
}

std::vector<int> Config::int_list(const std::string& key) const {
  std::vector<int> out;
  const std::string& v = entry(key).value;
  if (v.empty()) return out;
  for (const auto& item : split_commas(v)) {
    int x = 0;
    const auto [ptr, ec] =
        std::from_chars(item.data(), item.data() + item.size(), x);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
      bad(key, "expected a comma-separated list of integers");
    }
    out.push_back(x);
  }
  return out;
}

std::optional<double> Config::opt_num(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return num(key);
}

void Config::require_key(const std::string& key, const std::string& why) const {
  require(has(key), ErrorKind::kInvalidArgument,
          origin_ + ": missing required field '" + key + "' (" + why + ")");
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [k, e] : values_) out += k + "=" + e.value + "\n";
  return out;
}

std::string Config::hash() const { return fnv1a_hex(canonical()); }

}  // namespace ovb::cli
