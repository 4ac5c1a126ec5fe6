#pragma once

#include <cmath>
#include <cstdint>

namespace ncreg {

// SplitMix64: counter-based 64-bit generator. All randomness in this
// library flows through it so that runs are reproducible bit-for-bit
// regardless of platform or thread count. Substreams are derived by
// mixing a base seed with integer stream indices (see split()).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // uniform in (0, 1); never returns an exact endpoint
  double next_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Box-Muller with a cached spare; deterministic per stream.
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = next_open();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // integer in [0, n)
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

// Derive an independent substream seed from (seed, index...).
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t a) {
  return detail::mix64(seed ^ (detail::mix64(a + 0x9E3779B97F4A7C15ULL)));
}

inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t a,
                                std::uint64_t b) {
  return split_seed(split_seed(seed, a), b);
}

}  // namespace ncreg
