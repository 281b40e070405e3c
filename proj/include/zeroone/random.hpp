#ifndef ZEROONE_RANDOM_HPP
#define ZEROONE_RANDOM_HPP

#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace zeroone {

using Rng = std::mt19937_64;

/// Derives an independent generator seed from one base seed and a stream
/// name ("train/member-3", "attack", ...). FNV-1a over the name mixed with
/// the base, then a splitmix64 finalizer.
inline std::uint64_t substream_seed(std::uint64_t base, std::string_view name) {
  std::uint64_t h = 1469598103934665603ull ^ base;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  h += 0x9e3779b97f4a7c15ull;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
  return h ^ (h >> 31);
}

/// Fills out with i.i.d. N(0,1) draws from rng.
inline void fill_normal(Rng& rng, std::span<double> out) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : out) v = normal(rng);
}

/// Uniform index in [0, n).
inline std::size_t uniform_index(std::size_t n, Rng& rng) {
  if (n == 0) throw std::invalid_argument("uniform_index: empty range");
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

/// k distinct indices from [0, n) in draw order (partial Fisher-Yates).
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
  if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(i, n - 1)(rng);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace zeroone

#endif  // ZEROONE_RANDOM_HPP
