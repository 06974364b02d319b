#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <vector>

namespace samlab {

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

// Every recognized key with its default, in echo order.
const std::vector<ConfigKey>& config_schema();

// Flat key=value configuration. Lines are `key = value`, blank, or `#`
// comments. Keys outside the schema are rejected with ConfigError.
class Config {
 public:
  Config();  // all defaults

  void load(std::istream& in, const std::string& source = "<stream>");
  void load_file(const std::string& path);
  void set(const std::string& key, const std::string& value);
  // "key=value"
  void apply_override(const std::string& assignment);

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<std::size_t> get_sizes(const std::string& key) const;
  // Distinct seeds; duplicates are a ConfigError.
  std::vector<std::uint64_t> seeds() const;

  // Schema order, defaults expanded.
  std::vector<std::pair<std::string, std::string>> resolved() const;
  // One "# key=value" line per resolved key.
  std::string echo() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace samlab
