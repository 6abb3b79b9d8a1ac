#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace rembo {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Child seed for the `index`-th sub-stream of `parent`.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
  return mix64(mix64(parent) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Uniform in (0, 1] as a pure function of (key, counter).
inline double counter_uniform(std::uint64_t key, std::uint64_t counter) {
  const std::uint64_t bits = mix64(key ^ mix64(counter));
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

/// Standard normal as a pure function of (key, counter). Consumes counters
/// 2*counter and 2*counter+1 of the uniform stream (Box-Muller).
inline double counter_normal(std::uint64_t key, std::uint64_t counter) {
  const double u1 = counter_uniform(key, 2 * counter);
  const double u2 = counter_uniform(key, 2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace rembo
