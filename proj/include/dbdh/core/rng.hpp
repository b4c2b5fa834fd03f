#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dbdh {

namespace detail {

// splitmix64; used for seed mixing so derived streams are decorrelated.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Combine a base seed with a tag into a new stream seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  return detail::splitmix64(seed ^ detail::splitmix64(tag));
}

/// Deterministic random generator.
///
/// The engine is std::mt19937_64 (bit-exact across platforms per the
/// standard); the distributions are implemented here because the standard
/// library distributions are implementation-defined and would break the
/// cross-platform reproducibility contract of the augmentation pipeline.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0)
      : seed_(seed), eng_(detail::splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  /// Child stream independent of how many draws this stream has made.
  Rng child(std::uint64_t tag) const { return Rng(mix_seed(seed_, tag)); }

  std::uint64_t bits() { return eng_(); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi], inclusive. Unbiased via rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return lo + static_cast<std::int64_t>(eng_());
    const std::uint64_t limit = std::uint64_t(-1) - (std::uint64_t(-1) % span);
    std::uint64_t v = eng_();
    while (v >= limit) v = eng_();
    return lo + static_cast<std::int64_t>(v % span);
  }

  /// Standard normal via Box-Muller (no cached spare, so the draw count
  /// per sample is fixed and streams stay aligned).
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 eng_;
};

/// FNV-1a 64-bit hash; stable across platforms, used to key per-module
/// initialization streams and config hashes.
inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  return fnv1a64(s.data(), s.size());
}

}  // namespace dbdh
