#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>

namespace wyner {

// SplitMix64 (Vigna, 2015). Chosen over std::mt19937_64 because the standard
// distributions are not bit-reproducible across standard library
// implementations; this generator plus the explicit [0,1) mapping below is.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0,1), 53 mantissa bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

namespace detail {
inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ULL;
  x ^= x >> 33;
  return x;
}
}  // namespace detail

// Stable seed derivation: all sub-seeds (restarts, sweep cells, datasets)
// come from the one user-facing seed through this hash, so a single --seed
// reproduces a whole experiment.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t h = detail::mix64(base ^ 0x2545f4914f6cdd1dULL);
  h = detail::mix64(h ^ detail::mix64(a + 0x9e3779b97f4a7c15ULL));
  h = detail::mix64(h ^ detail::mix64(b + 0x632be59bd9b4e019ULL));
  return h;
}

// Inverse-transform draw: smallest index whose cumulative weight strictly
// exceeds u. Weights need not be normalized; u is scaled by the total.
inline std::size_t sample_from(std::span<const double> weights, double u) {
  if (weights.empty()) throw std::invalid_argument("sample_from: empty weights");
  double total = 0.0;
  for (double w : weights) total += w;
  const double target = u * total;
  double cum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    cum += weights[i];
    if (cum > target) return i;
  }
  return weights.size() - 1;  // u==1 or rounding at the top end
}

}  // namespace wyner
