#pragma once

// Per-replicate random streams. Every stream is a std::mt19937_64 seeded
// from splitmix64 applied to (master seed, sweep index, replicate id,
// stream tag), so a replicate's draws do not depend on which thread runs it
// or in what order.

#include <array>
#include <cstdint>
#include <random>

namespace crescent::rng {

using Engine = std::mt19937_64;

enum class Stream : std::uint64_t { design = 1, coefficients = 2, noise = 3 };

inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of one replicate, reported alongside its results.
inline std::uint64_t replicate_seed(std::uint64_t master, std::uint64_t sweep_index,
                                    std::uint64_t replicate) noexcept {
  std::uint64_t s = master;
  std::uint64_t h = splitmix64(s);
  s = h ^ sweep_index;
  h = splitmix64(s);
  s = h ^ replicate;
  return splitmix64(s);
}

inline Engine stream(std::uint64_t replicate_seed, Stream tag) {
  std::uint64_t s = replicate_seed ^ (static_cast<std::uint64_t>(tag) * 0xd1b54a32d192ed03ULL);
  std::array<std::uint32_t, 8> words{};
  for (std::size_t i = 0; i < words.size(); i += 2) {
    const std::uint64_t v = splitmix64(s);
    words[i] = static_cast<std::uint32_t>(v);
    words[i + 1] = static_cast<std::uint32_t>(v >> 32);
  }
  std::seed_seq seq(words.begin(), words.end());
  return Engine(seq);
}

}  // namespace crescent::rng
