#pragma once

// Seeded randomness with a fully documented algorithm, so that seeds give the
// same streams in any implementation:
//
//   * SplitMix64 (Steele, Lea, Flood 2014) expands a 64-bit seed into the
//     256-bit state of xoshiro256** 1.0 (Blackman, Vigna 2018).
//   * derive_seed(parent, key) = mix64(parent ^ mix64(key + 0x9E3779B97F4A7C15)),
//     where mix64 is the SplitMix64 output finalizer. Multi-key derivations fold
//     left: derive_seed(derive_seed(parent, k0), k1) ...
//   * Strings used as keys are hashed with 64-bit FNV-1a.
//   * uniform01: (next() >> 11) * 2^-53.
//   * uniform_index(n): rejection sampling on next() below 2^64 - (2^64 mod n),
//     then modulo n.
//   * normal: Box-Muller, z = sqrt(-2 ln(1 - u1)) cos(2 pi u2), one value per pair.
//
// Generator version: "xoshiro256ss-v1".

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace distunlearn {

inline constexpr std::string_view kRngVersion = "xoshiro256ss-v1";

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

constexpr std::uint64_t derive_seed_one(std::uint64_t parent, std::uint64_t key) {
  return mix64(parent ^ mix64(key + 0x9E3779B97F4A7C15ULL));
}

constexpr std::uint64_t seed_key(std::uint64_t key) { return key; }
constexpr std::uint64_t seed_key(std::string_view key) { return fnv1a64(key); }

/// Folds each key into the parent seed in order. Keys are integers or strings.
template <class... Keys>
constexpr std::uint64_t derive_seed(std::uint64_t parent, const Keys&... keys) {
  std::uint64_t s = parent;
  ((s = derive_seed_one(s, seed_key(keys))), ...);
  return s;
}

class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& w : state_) {
      x += 0x9E3779B97F4A7C15ULL;
      w = mix64(x);
    }
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  result_type operator()() { return next(); }

  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: empty range");
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    std::uint64_t x = next();
    while (x < threshold) x = next();
    return x % n;
  }

  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::array<std::uint64_t, 4> state_{};
};

/// First k entries of a seeded Fisher-Yates shuffle of 0..n-1. Prefixes are
/// nested: the draw for k is a prefix of the draw for k + 1 under the same seed.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                           std::uint64_t seed) {
  if (k > n) throw std::invalid_argument("sample_without_replacement: k exceeds n");
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(n - i));
    std::swap(perm[i], perm[j]);
  }
  perm.resize(k);
  return perm;
}

}  // namespace distunlearn
