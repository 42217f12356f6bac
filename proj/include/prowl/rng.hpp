#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace prowl::rng {

// SplitMix64. Self-contained so that seeded runs are reproducible across
// compilers and standard libraries (std::shuffle is not).
class Stream {
 public:
  explicit Stream(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, n) without modulo bias (rejection sampling).
  uint64_t below(uint64_t n) {
    if (n <= 1) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v = next();
    while (v >= limit) v = next();
    return v % n;
  }

  // Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  uint64_t state_;
};

inline uint64_t hash_tag(std::string_view tag) {
  uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

// Fan a master seed out into independent streams, one per (tag, counter)
// consumer. Adding a consumer never perturbs the streams of existing ones.
inline Stream fork(uint64_t seed, std::string_view tag, uint64_t counter = 0) {
  Stream mix(seed ^ hash_tag(tag));
  uint64_t s = mix.next() + 0x9e3779b97f4a7c15ull * counter;
  return Stream(s);
}

template <typename T>
void shuffle(std::vector<T>& v, Stream& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.below(i));
    std::swap(v[i - 1], v[j]);
  }
}

// First `count` elements of a seeded permutation of [0, n); order is part of
// the contract (materialized constraint examples keep this order).
inline std::vector<size_t> sample_without_replacement(size_t n, size_t count,
                                                      Stream& rng) {
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  shuffle(idx, rng);
  if (count < n) idx.resize(count);
  return idx;
}

}  // namespace prowl::rng
