#include "cortexfit/key_value.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cortexfit/types.hpp"

namespace cortexfit {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

bool KeyValueFile::has(const std::string& key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return true;
  return false;
}

const std::string& KeyValueFile::get(const std::string& key) const {
  const std::string* found = nullptr;
  for (const auto& [k, v] : entries) {
    if (k != key) continue;
    if (found) throw Error(source + ": duplicate key '" + key + "'");
    found = &v;
  }
  if (!found) throw Error(source + ": missing key '" + key + "'");
  return *found;
}

KeyValueFile parse_key_value(std::istream& in, const std::string& source) {
  KeyValueFile file;
  file.source = source;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw Error(source + ":" + std::to_string(lineno) + ": expected 'key = value', got '" + stripped + "'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty())
      throw Error(source + ":" + std::to_string(lineno) + ": empty key");
    file.entries.emplace_back(key, value);
  }
  return file;
}

KeyValueFile read_key_value_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return parse_key_value(in, path.string());
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& text, const std::string& context) {
  const char* begin = text.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw Error(context + ": expected a number, got '" + text + "'");
  return v;
}

long long parse_int(const std::string& text, const std::string& context) {
  const char* begin = text.c_str();
  char* end = nullptr;
  const long long v = std::strtoll(begin, &end, 10);
  if (end == begin || *end != '\0')
    throw Error(context + ": expected an integer, got '" + text + "'");
  return v;
}

namespace {

std::vector<std::string> split_fields(const std::string& text) {
  std::vector<std::string> fields;
  std::istringstream ss(text);
  std::string tok;
  while (ss >> tok) fields.push_back(tok);
  return fields;
}

}  // namespace

std::array<double, 3> parse_double_triple(const std::string& text, const std::string& context) {
  const auto fields = split_fields(text);
  if (fields.size() != 3)
    throw Error(context + ": expected three numbers, got '" + text + "'");
  return {parse_double(fields[0], context), parse_double(fields[1], context),
          parse_double(fields[2], context)};
}

std::array<long long, 3> parse_int_triple(const std::string& text, const std::string& context) {
  const auto fields = split_fields(text);
  if (fields.size() != 3)
    throw Error(context + ": expected three integers, got '" + text + "'");
  return {parse_int(fields[0], context), parse_int(fields[1], context),
          parse_int(fields[2], context)};
}

}  // namespace cortexfit
