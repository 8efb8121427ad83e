#pragma once

// Shared error types, numeric constants, and small formatting utilities.

#include <cstdint>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace specdecay {

inline constexpr double kEps = std::numeric_limits<double>::epsilon();

// Dense assembly is refused above this entry count; callers must fall back to
// structured or matrix-free representations. Sized to admit a 5000x5000
// kernel (the largest grid any built-in study assembles) while refusing the
// 6400-point multiplication sweep, whose diagonal never needs dense storage.
inline constexpr std::int64_t kMaxDenseEntries = 26'000'000;

// Thrown when a dense-path request would exceed kMaxDenseEntries.
class SizeLimitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// FNV-1a 64-bit hash, used for cache keys and file manifests.
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t seed = 14695981039346656037ull) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string to_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// 17 significant digits: enough for exact double round-trip.
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace specdecay
