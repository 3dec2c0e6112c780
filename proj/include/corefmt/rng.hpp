#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <string_view>

namespace corefmt {

// Independent, reproducible generator for (seed, purpose, indices...). Each
// consumer of randomness draws from its own stream so that adding or removing
// one consumer never shifts another's draws.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::string_view purpose,
                                   std::initializer_list<std::uint64_t> indices = {}) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : purpose) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  std::mt19937_64 base(seq);
  for (std::uint64_t i : indices) {
    std::seed_seq next{static_cast<std::uint32_t>(base()), static_cast<std::uint32_t>(i),
                       static_cast<std::uint32_t>(i >> 32)};
    base.seed(next);
  }
  return base;
}

// Uniform integer in [0, n) independent of the standard library's
// distribution implementation.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

}  // namespace corefmt
