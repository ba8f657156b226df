#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace crowdrank {

// Deterministic random source. All randomness in the library flows through
// this class so that a seed pins every downstream artifact. std::mt19937_64
// has a standard-specified output sequence; the derived draws below avoid
// std::*_distribution, whose sequences vary between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on [0, n), exactly unbiased via rejection.
  std::size_t below(std::size_t n) {
    assert(n > 0);
    const std::uint64_t un = n;
    const std::uint64_t tail = (0 - un) % un;  // 2^64 mod n
    std::uint64_t x = engine_();
    if (tail != 0) {
      const std::uint64_t cap = 0 - tail;  // largest multiple of n
      while (x >= cap) x = engine_();
    }
    return static_cast<std::size_t>(x % un);
  }

  // Standard normal via Box-Muller (cosine branch only).
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      using std::swap;
      swap(v[i - 1], v[below(i)]);
    }
  }

  // Stable seed derivation for per-question / per-day substreams.
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return splitmix(a + splitmix(b)); }

  // FNV-1a, used for deriving seeds from ids and for file digests.
  static std::uint64_t hash_bytes(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return h;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace crowdrank
