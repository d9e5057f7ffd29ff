#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace vatika {

// FNV-1a, used to fold strings into RNG seeds. Not a content digest.
inline uint64_t fnv1a64(std::string_view s, uint64_t seed = 0xcbf29ce484222325ull) {
  uint64_t h = seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  // splitmix64 finalizer over the xor; cheap and well distributed.
  uint64_t z = (a ^ (b + 0x9e3779b97f4a7c15ull)) + 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Unbiased bounded draw (rejection sampling). std::uniform_int_distribution is
// implementation-defined across standard libraries; this one is pinned so
// shuffles reproduce bit-for-bit anywhere.
inline uint64_t bounded_rand(std::mt19937_64& rng, uint64_t bound) {
  const uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const uint64_t r = rng();
    if (r >= threshold) return r % bound;
  }
}

// Deterministic Fisher-Yates.
template <typename T>
void seeded_shuffle(std::vector<T>& v, uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (size_t i = v.size(); i > 1; --i) {
    const size_t j = size_t(bounded_rand(rng, i));
    using std::swap;
    swap(v[i - 1], v[j]);
  }
}

}  // namespace vatika
