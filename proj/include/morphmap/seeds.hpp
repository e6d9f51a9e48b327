#pragma once

#include <cstdint>
#include <random>

namespace morphmap {

// Entity kind tags mixed into child seeds.
enum class SeedTag : std::uint64_t {
  Subject = 0x5355424aULL,
  Sample = 0x53414d50ULL,
  Projection = 0x50524f4aULL,
  ExtractNoise = 0x4e4f4953ULL,
  Variant = 0x56415249ULL,
  NonMatedSubsample = 0x4e4d5342ULL,
  Model = 0x4d4f444cULL,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Child seed as a 64-bit hash of (parent, kind, index). No RNG state is shared
/// between entities, so generation order does not affect results.
inline constexpr std::uint64_t derive_seed(std::uint64_t parent, SeedTag tag,
                                           std::uint64_t index) noexcept {
  std::uint64_t h = splitmix64(parent);
  h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
  return splitmix64(h ^ index);
}

template <typename... Indices>
inline constexpr std::uint64_t derive_seed(std::uint64_t parent, SeedTag tag, std::uint64_t first,
                                           std::uint64_t second, Indices... rest) noexcept {
  return derive_seed(derive_seed(parent, tag, first), tag, second, rest...);
}

using Rng = std::mt19937_64;

}  // namespace morphmap
