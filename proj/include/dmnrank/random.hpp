#pragma once

#include <cstdint>
#include <string_view>

namespace dmnrank {

/// Child seed for a named component, derived from the run's top-level seed
/// with an FNV-1a hash of the name followed by a splitmix64 finalizer.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view component, std::uint64_t salt = 0) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : component) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::uint64_t z = seed ^ h ^ (salt * 0x9e3779b97f4a7c15ull);
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace dmnrank
