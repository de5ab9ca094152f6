#pragma once

// Counter-based random streams.
//
// A stream is a (key, counter) pair; the n-th output is a bijective mix of
// key + n * golden.  Streams never share state, so replicate r of an
// experiment can be regenerated without touching replicates 0..r-1, and the
// result of a parallel run does not depend on scheduling.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

namespace rilab {

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derive a child key from a parent key and a tag.  Different tags give
// unrelated keys; the map is deterministic.
inline constexpr std::uint64_t derive_key(std::uint64_t parent, std::uint64_t tag) {
  return mix64(parent ^ mix64(tag + 0x9e3779b97f4a7c15ULL) ^ 0x5851f42d4c957f2dULL);
}

inline constexpr std::uint64_t derive_key(std::uint64_t parent,
                                          std::initializer_list<std::uint64_t> tags) {
  for (auto t : tags) parent = derive_key(parent, t);
  return parent;
}

// Short ASCII tag -> integer, for readable stream names.
inline constexpr std::uint64_t tag(const char* s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (; *s; ++s) h = (h ^ static_cast<unsigned char>(*s)) * 0x100000001b3ULL;
  return h;
}

class Stream {
 public:
  using result_type = std::uint64_t;

  constexpr Stream() = default;
  constexpr explicit Stream(std::uint64_t key, std::uint64_t counter = 0)
      : key_(key), counter_(counter) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix64(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  // Uniform in [0,1) with 53 bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
  // Uniform in (0,1].
  double uniform_pos() { return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53; }

  // Unbiased integer in [0, n), Lemire's multiply-and-reject.
  std::uint64_t below(std::uint64_t n) {
    std::uint64_t x = (*this)();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      const std::uint64_t t = (0 - n) % n;
      while (lo < t) {
        x = (*this)();
        m = static_cast<__uint128_t>(x) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  double exponential(double rate = 1.0) { return -std::log(uniform_pos()) / rate; }

  std::int64_t poisson(double mean) {
    if (!(mean > 0.0)) return 0;
    std::poisson_distribution<std::int64_t> dist(mean);
    return dist(*this);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace rilab
