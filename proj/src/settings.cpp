#include "dmnrank/settings.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>

#include "dmnrank/error.hpp"

namespace dmnrank::settings {

namespace {
[[noreturn]] void bad(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("setting '" + std::string(key) + "': '" + std::string(value) + "' is not " +
                    std::string(expected));
}
}  // namespace

std::uint64_t to_u64(std::string_view key, std::string_view value) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || value.empty())
    bad(key, value, "a non-negative integer");
  return out;
}

std::size_t to_size(std::string_view key, std::string_view value) {
  return static_cast<std::size_t>(to_u64(key, value));
}

double to_double(std::string_view key, std::string_view value) {
  std::string s(value);
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) bad(key, value, "a number");
  return v;
}

bool to_bool(std::string_view key, std::string_view value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  bad(key, value, "a boolean");
}

std::pair<std::size_t, std::size_t> to_size_pair(std::string_view key, std::string_view value) {
  auto sep = value.find_first_of(",x");
  if (sep == std::string_view::npos) {
    auto n = to_size(key, value);
    return {n, n};
  }
  return {to_size(key, value.substr(0, sep)), to_size(key, value.substr(sep + 1))};
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace dmnrank::settings
