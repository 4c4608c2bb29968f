#pragma once

#include <array>
#include <filesystem>
#include <istream>
#include <string>
#include <utility>
#include <vector>

namespace cortexfit {

/// One `key = value` per line, order preserved. Blank lines are allowed;
/// anything else without '=' is an error.
struct KeyValueFile {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string source;  // file name used in error messages

  bool has(const std::string& key) const;
  /// Value of a key that must appear exactly once.
  const std::string& get(const std::string& key) const;
};

KeyValueFile read_key_value_file(const std::filesystem::path& path);
KeyValueFile parse_key_value(std::istream& in, const std::string& source);

/// Formats a double so that parsing it back recovers the exact value.
std::string format_double(double v);

double parse_double(const std::string& text, const std::string& context);
long long parse_int(const std::string& text, const std::string& context);
std::array<double, 3> parse_double_triple(const std::string& text, const std::string& context);
std::array<long long, 3> parse_int_triple(const std::string& text, const std::string& context);

}  // namespace cortexfit
