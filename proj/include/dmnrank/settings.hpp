#pragma once

// Parsing of key=value setting values. All failures raise ConfigError.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

namespace dmnrank::settings {

std::size_t to_size(std::string_view key, std::string_view value);
std::uint64_t to_u64(std::string_view key, std::string_view value);
double to_double(std::string_view key, std::string_view value);
bool to_bool(std::string_view key, std::string_view value);
/// "3,3" or "3x3"; a single number means a square window.
std::pair<std::size_t, std::size_t> to_size_pair(std::string_view key, std::string_view value);

std::string format_double(double v);

}  // namespace dmnrank::settings
