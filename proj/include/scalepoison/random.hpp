#pragma once

// Seeded helpers with a portable output sequence. std::mt19937_64 is fully
// specified by the standard; the distributions in <random> are not, so the
// few we need are written out here.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace scalepoison {

using Rng = std::mt19937_64;

/// Uniform integer in [0, n) by rejection; n > 0.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v = rng();
  while (v >= limit) v = rng();
  return v % n;
}

/// Uniform real in [0, 1) with 53 random bits.
inline double uniform_real(Rng& rng) { return double(rng() >> 11) * 0x1.0p-53; }

/// Standard normal via Box-Muller (one value per call).
inline double normal(Rng& rng) {
  double u1 = uniform_real(rng);
  while (u1 <= 0.0) u1 = uniform_real(rng);
  const double u2 = uniform_real(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

/// k distinct elements of pool, in draw order.
template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> pool, std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_index(rng, pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

/// Independent stream for a sub-task, derived from a base seed and a tag.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (std::uint64_t(words[0]) << 32) | words[1];
}

}  // namespace scalepoison
