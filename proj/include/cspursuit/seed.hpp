#pragma once

#include <cstdint>
#include <random>

namespace csp {

/// Roles that receive independent random streams inside one trial.
enum class SeedRole : std::uint64_t {
  kOperator = 1,
  kSignal = 2,
  kNoise = 3,
};

/// SplitMix64 finalizer; a bijection on 64-bit words with good avalanche.
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed derivation rule: child = splitmix64(parent ^ splitmix64(tag)).
// Trials use tag = 0x1000 + trial index; roles use their enum value.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag) noexcept {
  return splitmix64(parent ^ splitmix64(tag));
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, SeedRole role) noexcept {
  return derive_seed(parent, static_cast<std::uint64_t>(role));
}

constexpr std::uint64_t trial_seed(std::uint64_t master, std::uint64_t trial) noexcept {
  return derive_seed(master, 0x1000 + trial);
}

using Rng = std::mt19937_64;

}  // namespace csp
