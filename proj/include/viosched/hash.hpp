#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace viosched {

// FNV-1a, 64-bit. Used to fingerprint traces, configs and profile tables in
// run-log headers so compare can verify two logs came from the same inputs.
inline std::uint64_t fnv1a64(std::string_view data,
                             std::uint64_t seed = 0xcbf29ce484222325ULL) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64_append(std::uint64_t h, std::uint64_t value) {
  for (int i = 0; i < 8; ++i) {
    h ^= static_cast<unsigned char>(value >> (i * 8));
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string to_hex(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

}  // namespace viosched
