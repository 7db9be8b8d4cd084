#pragma once

#include <map>
#include <string>
#include <vector>

namespace kdvlab {

/// Flat `key = value` configuration with `[section]` headers and `#` comments.
/// Keys are addressed as "section.key"; keys before any header live in "".
class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text);

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;

  void set(const std::string& key, const std::string& value) { kv_[key] = value; }

  /// FNV-1a hash of the canonical (sorted) key=value dump; recorded in every
  /// CSV comment line so outputs are traceable to their configuration.
  std::uint64_t hash() const;

  const std::map<std::string, std::string>& items() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace kdvlab
