#pragma once

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

namespace bottleneck {

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, result.ptr);
}

/// Splits one CSV line on commas; surrounding double quotes are stripped and
/// doubled quotes inside a quoted field are unescaped.
std::vector<std::string> split_csv_line(std::string_view line);

/// Parses a whole-field double; returns false on any trailing garbage.
bool parse_double(std::string_view text, double& out);

std::string trim(std::string_view text);

}  // namespace bottleneck
