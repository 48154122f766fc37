#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <vector>

namespace cachebeam {

// SplitMix64 finalizer; used both as the seed-derivation mixer and to expand a
// single seed into engine state.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Published derivation rule for sub-stream seeds: fold every tag into the
// running state with splitmix64 (order-sensitive by design).
//   seed(master, t1, t2, ...) = fold(...fold(fold(splitmix64(master), t1), t2)...)
// where fold(s, t) = splitmix64(s ^ (t + 0x9E3779B97F4A7C15 + (s << 6) + (s >> 2))).
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = splitmix64(master);
  for (std::uint64_t t : tags)
    s = splitmix64(s ^ (t + 0x9E3779B97F4A7C15ULL + (s << 6) + (s >> 2)));
  return s;
}

inline std::uint64_t derive_seed(std::uint64_t master,
                                 const std::vector<std::uint64_t>& tags) {
  std::uint64_t s = splitmix64(master);
  for (std::uint64_t t : tags)
    s = splitmix64(s ^ (t + 0x9E3779B97F4A7C15ULL + (s << 6) + (s >> 2)));
  return s;
}

// Deterministic random stream. The engine (std::mt19937_64) is fully specified
// by the standard; the variate transforms below are implemented here rather
// than with std::*_distribution so that draws are identical on any platform.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : eng_(splitmix64(seed ^ 0xD6E8FEB86659FD93ULL)) {}

  std::uint64_t u64() { return eng_(); }

  // Uniform on [0, 1): 53 random mantissa bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Standard normal via Box-Muller; caches the sine partner.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  // Circularly symmetric complex Gaussian with unit variance, E|z|^2 = 1.
  std::complex<double> cnormal() {
    double re = normal();
    double im = normal();
    return {re * 0.7071067811865475244, im * 0.7071067811865475244};
  }

  // Index draw from a finite distribution (probabilities need not be
  // normalized perfectly; the last bucket absorbs rounding).
  int pick(const std::vector<double>& probs) {
    if (probs.empty()) throw std::invalid_argument("pick: empty distribution");
    double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size() - 1);
  }

 private:
  std::mt19937_64 eng_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace cachebeam
