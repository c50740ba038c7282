#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace resdyn::core {

/// Seeded generator with bit-stable distributions. std::mt19937_64 is
/// specified exactly by the standard; the uniform/gaussian transforms are
/// implemented here so sampled values do not depend on the standard
/// library's distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed), seed_hash_(splitmix(seed)) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  long uniform_int(long lo, long hi) {  // inclusive bounds
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<long>(eng_() % span);
  }

  /// Standard normal via Box-Muller; one spare cached per pair.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double two_pi = 6.283185307179586476925286766559;
    spare_ = mag * std::sin(two_pi * u2);
    has_spare_ = true;
    return mag * std::cos(two_pi * u2);
  }

  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

  /// Derive an independent stream (e.g. one per trajectory or seed cell).
  Rng fork(std::uint64_t stream) const {
    return Rng(splitmix(seed_hash_ ^ (0x9e3779b97f4a7c15ULL * (stream + 1))));
  }

  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 eng_;
  std::uint64_t seed_hash_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace resdyn::core
