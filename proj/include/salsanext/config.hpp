#pragma once

// Minimal key=value configuration files. '#' starts a comment, lists are
// comma separated, blank lines are ignored.

#include <charconv>
#include <initializer_list>
#include <map>
#include <string>
#include <vector>

#include "salsanext/error.hpp"

namespace salsanext {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  int get_int(const std::string& key, int fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;
  std::vector<float> get_float_list(const std::string& key, const std::vector<float>& fallback) const;
  std::vector<double> get_double_list(const std::string& key, const std::vector<double>& fallback) const;

  /// Config error naming the first key outside `known`.
  void reject_unknown(std::initializer_list<const char*> known) const;

 private:
  std::map<std::string, std::string> values_;
};

/// Whole file as text; config error when unreadable.
std::string read_text_file(const std::string& path);

/// Shortest text that parses back to the same value.
template <typename T>
std::string format_number(T value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

template <typename T>
std::string join_list(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + format_number(values[i]);
  return out;
}

}  // namespace salsanext
