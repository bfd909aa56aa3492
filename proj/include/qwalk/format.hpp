#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <system_error>

namespace qwalk {

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double value) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, end);
}

inline std::string format_int(std::int64_t value) { return std::to_string(value); }

}  // namespace qwalk
