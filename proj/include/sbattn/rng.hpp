#pragma once

#include <cmath>
#include <cstdint>

namespace sbattn {

// Counter-free splitmix64 stream. Deterministic for a given seed on every
// platform, which is what keeps benchmark CSVs and sketch matrices
// reproducible across runs.
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
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in (0, 1]; safe as a log() argument.
  double uniform01_open_low() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller (one value per call; the sibling value is
  // discarded so the stream layout stays simple and order-independent).
  double gaussian() {
    double u1 = uniform01_open_low();
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // +1 or -1 with equal probability.
  double rademacher() { return (next_u64() & 1ull) ? 1.0 : -1.0; }

 private:
  std::uint64_t state_;
};

// Derives an independent stream seed from a base seed and a few tags.
// Used to give every (matrix, block, sketch stage) its own stream.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag0,
                                 std::uint64_t tag1 = 0, std::uint64_t tag2 = 0) {
  Rng mix(base ^ (0xd1b54a32d192ed03ull + tag0));
  mix.next_u64();
  Rng mix2(mix.next_u64() ^ (tag1 * 0x9e3779b97f4a7c15ull) ^ (tag2 * 0xbf58476d1ce4e5b9ull));
  return mix2.next_u64();
}

}  // namespace sbattn
