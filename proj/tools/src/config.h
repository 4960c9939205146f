#ifndef OVB_TOOLS_CONFIG_H_
#define OVB_TOOLS_CONFIG_H_

// Flat key=value run configuration. Lines are `key = value`; `#` starts a
// comment; blank lines are ignored. Unknown or repeated keys are errors.
// Every key has a default (see kDefaults in config.cc).

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ovb::cli {

class Config {
 public:
  // `origin` prefixes error messages ("config:LINE: ...").
  static Config parse(const std::string& text,
                      const std::string& origin = "config");
  static Config load(const std::string& path);

  // Applies a command-line override as if it came from the file.
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;
  std::string str(const std::string& key) const;
  double num(const std::string& key) const;
  long long integer(const std::string& key) const;
  std::uint64_t seed() const;
  std::vector<double> num_list(const std::string& key) const;
  std::vector<int> int_list(const std::string& key) const;
  std::optional<double> opt_num(const std::string& key) const;

  // Fails with a message naming `key` when it has no value.
  void require_key(const std::string& key, const std::string& why) const;

  // Canonical "key=value" lines over all keys, defaults included.
  std::string canonical() const;
  std::string hash() const;

 private:
  struct Entry {
    std::string value;
    int line = 0;  // 0 for defaults and overrides
  };
  const Entry& entry(const std::string& key) const;
  [[noreturn]] void bad(const std::string& key, const std::string& what) const;

  std::string origin_ = "config";
  std::map<std::string, Entry> values_;
};

}  // namespace ovb::cli

#endif  // OVB_TOOLS_CONFIG_H_
