#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace cpb {

// Flat `key = value` text with `#` comments. Later keys override earlier ones.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in);

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  uint64_t get_uint(const std::string& key, uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Comma separated, whitespace trimmed, empty items dropped.
  std::vector<std::string> get_list(const std::string& key) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  // Throws std::invalid_argument naming the first key outside `allowed`.
  void reject_unknown(const std::set<std::string>& allowed) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

std::vector<std::string> split_list(const std::string& text, char sep = ',');
std::string trim(std::string_view text);

}  // namespace cpb
