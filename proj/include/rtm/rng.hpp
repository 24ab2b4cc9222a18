#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

// Counter-based random number generation.
//
// Every draw is a pure function key(seed, tag, counter) -> value, so any stream
// can be regenerated from scratch at any point (checkpoint resume) and disjoint
// counter ranges can be filled in parallel with bit-identical results. The
// mixer is the SplitMix64 finalizer applied to a combined key.

namespace rtm::rng {

inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// FNV-1a over the tag string; tags separate independent streams ("pool",
// "batch", "init", "eval", ...) drawn from the same run seed.
inline uint64_t hash_tag(std::string_view tag) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// A keyed stream: successive counters give independent draws.
class Stream {
 public:
  Stream(uint64_t seed, std::string_view tag, uint64_t salt = 0)
      : key_(mix64(seed ^ mix64(hash_tag(tag) + 0x632be59bd9b4e019ull * salt))) {}

  uint64_t bits(uint64_t counter) const { return mix64(key_ + counter); }

  // Uniform in [0, 1): 53 random mantissa bits.
  double uniform(uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; draw c consumes counters 2c and 2c+1.
  // log(1 - u) keeps the argument strictly positive.
  double normal(uint64_t counter) const {
    double u1 = uniform(2 * counter);
    double u2 = uniform(2 * counter + 1);
    double r = std::sqrt(-2.0 * std::log1p(-u1));
    return r * std::cos(2.0 * M_PI * u2);
  }

  // Uniform integer in [0, n) by rejection-free multiply-shift (n << 2^64, the
  // modulo bias is < n / 2^64 and irrelevant at lab scale but we keep the
  // widely used unbiased-enough mapping explicit).
  uint64_t below(uint64_t counter, uint64_t n) const {
    return static_cast<uint64_t>((static_cast<__uint128_t>(bits(counter)) * n) >> 64);
  }

  uint64_t key() const { return key_; }

 private:
  uint64_t key_;
};

// Fill `out` with standard normals from counters [0, out.size()).
inline void fill_normal(const Stream& s, std::vector<double>& out) {
  for (size_t i = 0; i < out.size(); ++i) out[i] = s.normal(i);
}

// Draw k distinct indices from [0, n) by partial Fisher-Yates; deterministic
// in (stream, n, k). Requires k <= n.
std::vector<int64_t> inline sample_without_replacement(const Stream& s, int64_t n, int64_t k) {
  std::vector<int64_t> idx(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  for (int64_t i = 0; i < k; ++i) {
    uint64_t j = i + s.below(static_cast<uint64_t>(i), static_cast<uint64_t>(n - i));
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
  }
  idx.resize(static_cast<size_t>(k));
  return idx;
}

}  // namespace rtm::rng
