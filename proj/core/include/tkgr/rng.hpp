#pragma once

// Deterministic splitmix64 stream. Every stochastic component takes one of
// these by reference; independent streams are derived by hashing a master
// seed with stream tags, so runs are reproducible bit-for-bit on one machine.

#include <cstdint>
#include <initializer_list>
#include <vector>

#include "tkgr/common.hpp"

namespace tkgr {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) fail(ErrorKind::contract, "Rng::below requires n > 0");
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Index drawn proportionally to non-negative weights (normalized here).
  std::size_t weighted(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0) fail(ErrorKind::contract, "negative sampling weight");
      total += w;
    }
    if (total <= 0.0) fail(ErrorKind::contract, "all sampling weights are zero");
    double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    return weights.size() - 1;
  }

  // Up to k distinct indices, probability proportional to weights.
  std::vector<std::size_t> weighted_without_replacement(std::vector<double> weights,
                                                        std::size_t k) {
    std::vector<std::size_t> picked;
    std::size_t avail = 0;
    for (double w : weights)
      if (w > 0.0) ++avail;
    k = k < avail ? k : avail;
    picked.reserve(k);
    while (picked.size() < k) {
      std::size_t i = weighted(weights);
      picked.push_back(i);
      weights[i] = 0.0;
    }
    return picked;
  }

  static std::uint64_t mix(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x243f6a8885a308d3ull;
    for (std::uint64_t p : parts) {
      h ^= p + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
      h *= 0xff51afd7ed558ccdull;
      h ^= h >> 33;
    }
    return h;
  }

  Rng derive(std::initializer_list<std::uint64_t> parts) const {
    std::uint64_t h = mix(parts);
    return Rng(mix({state_, h}));
  }

 private:
  std::uint64_t state_;
};

}  // namespace tkgr
