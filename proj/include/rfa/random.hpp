#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace rfa {

using Rng = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Seed of the named sub-stream `name` / `index` under a master seed. Streams
/// never depend on scheduling, only on (seed, name, index).
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::string_view name,
                                    std::uint64_t index = 0) noexcept {
  return detail::splitmix64(detail::splitmix64(seed ^ detail::fnv1a(name)) + index);
}

inline Rng make_rng(std::uint64_t seed, std::string_view name, std::uint64_t index = 0) {
  return Rng(stream_seed(seed, name, index));
}

}  // namespace rfa
