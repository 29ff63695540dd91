#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace nnbm {

/// Seeded random generator with a pinned draw algorithm.
///
/// All transformations from raw mt19937_64 output to doubles are spelled out
/// here instead of going through std:: distributions, whose output is
/// implementation-defined. Identical seeds therefore give identical streams
/// on every platform. Provenance records name this algorithm as kRngAlgorithm.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  /// Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Uniform on the half-open interval [low, high).
  double uniform(double low, double high) { return low + (high - low) * uniform(); }

  /// Uniform on (0, 1]; safe as a log() argument.
  double uniform_pos() { return 1.0 - uniform(); }

  /// Standard normal via Box-Muller; the paired value is cached.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 6.283185307179586476925286766559 * u2;
    cached_ = rad * std::sin(ang);
    have_cached_ = true;
    return rad * std::cos(ang);
  }

  /// Exponential with the given rate.
  double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

 private:
  std::mt19937_64 gen_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

inline constexpr const char* kRngAlgorithm = "mt19937_64/shift53-uniform/box-muller";

/// Stream-splitting rule: child seed k of a root seed, via the splitmix64
/// finalizer on root xor (k+1)*golden-gamma. Used to derive per-trial and
/// per-chain seeds so concurrent streams never overlap by construction.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t k) {
  std::uint64_t z = root ^ ((k + 1) * 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace nnbm
