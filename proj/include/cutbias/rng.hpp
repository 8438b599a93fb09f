#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cutbias {

// splitmix64 finalizer; bijective on uint64.
inline std::uint64_t mix_bits(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Identifies one generator stream. Distinct (master, stream) pairs give
// independent streams, so every unit of work (simulation, bootstrap
// replicate, ABC draw) can be seeded by counter instead of by sharing a
// generator. Results are then identical at any parallelism level.
struct SeedSpec {
  std::uint64_t master = 0;
  std::uint64_t stream = 0;

  // Derives a sub-stream: the current pair is folded into a new master and
  // `substream` becomes the counter.
  SeedSpec child(std::uint64_t substream) const {
    return SeedSpec{mix_bits(master ^ mix_bits(stream)), substream};
  }

  std::uint64_t state() const { return mix_bits(master ^ mix_bits(stream)); }

  bool operator==(const SeedSpec&) const = default;
};

// mt19937_64 wrapper with hand-rolled variate transforms. The standard
// distribution classes are implementation-defined, so uniform/normal/bounded
// draws are produced directly from raw 64-bit output to keep streams
// bit-reproducible across standard libraries.
class RngStream {
 public:
  explicit RngStream(SeedSpec seed) : eng_(seed.state()) {}

  // [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform01() < p; }

  // Standard normal via Box-Muller; pairs are cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double two_pi = 6.283185307179586476925286766559;
    spare_ = r * std::sin(two_pi * u2);
    have_spare_ = true;
    return r * std::cos(two_pi * u2);
  }

  // Uniform integer in [0, n). Multiply-shift; bias is O(n / 2^64).
  std::uint64_t uniform_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(eng_()) * n) >> 64);
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace cutbias
