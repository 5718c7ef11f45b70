#pragma once

#include "salab/error.hpp"

#include <charconv>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

namespace salab::detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline double parse_double(std::string_view text, const std::string& key) {
  auto t = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError("value of '" + key + "' is not a number: '" + std::string(t) + "'");
  return v;
}

inline int parse_int(std::string_view text, const std::string& key) {
  auto t = trim(text);
  int v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError("value of '" + key + "' is not an integer: '" + std::string(t) + "'");
  return v;
}

inline std::vector<double> parse_double_list(std::string_view text, const std::string& key) {
  std::vector<double> out;
  auto rest = trim(text);
  while (!rest.empty()) {
    auto comma = rest.find(',');
    out.push_back(parse_double(rest.substr(0, comma), key));
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  if (out.empty()) throw ConfigError("value of '" + key + "' is empty");
  return out;
}

/// 17 significant digits: parses back to the identical double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace salab::detail
