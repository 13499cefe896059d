#pragma once

#include <cstdint>
#include <random>

namespace lindeberg {

/// Root of a reproducible random stream.
struct RandomSeed {
  std::uint64_t value = 0;

  friend bool operator==(RandomSeed, RandomSeed) = default;
};

using Engine = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

} // namespace detail

/// Child seed for stream `index` of `parent`. Pure function of both arguments,
/// so replicate r always sees the same stream no matter which worker runs it.
constexpr RandomSeed derive_seed(RandomSeed parent, std::uint64_t index) noexcept {
  const std::uint64_t mixed = detail::splitmix64(parent.value) ^
                              detail::splitmix64(index + 0xD1B54A32D192ED03ULL);
  return RandomSeed{detail::splitmix64(mixed)};
}

inline Engine make_engine(RandomSeed seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed.value),
                    static_cast<std::uint32_t>(seed.value >> 32)};
  return Engine(seq);
}

} // namespace lindeberg
