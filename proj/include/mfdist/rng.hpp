#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace mfdist {

// Random streams are std::mt19937_64, whose output sequence is fixed by the
// C++ standard. The std:: distributions are implementation-defined, so every
// variate below is derived from raw 64-bit words by hand; a seed therefore
// reproduces the same draws on any conforming platform.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_open0() { return 1.0 - uniform(); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, n). Lemire's nearly-divisionless rejection.
  std::uint64_t index(std::uint64_t n) {
    unsigned __int128 product = static_cast<unsigned __int128>(engine_()) * n;
    auto low = static_cast<std::uint64_t>(product);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        product = static_cast<unsigned __int128>(engine_()) * n;
        low = static_cast<std::uint64_t>(product);
      }
    }
    return static_cast<std::uint64_t>(product >> 64);
  }

  /// Standard normal via Box-Muller (one variate per call, the pair's twin is
  /// discarded so the stream position stays a pure function of call count).
  double normal() {
    const double u1 = uniform_open0();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for a child stream identified by a path of integers below `master`.
template <typename... Ids>
constexpr std::uint64_t derive_seed(std::uint64_t master, Ids... ids) {
  std::uint64_t s = mix_seed(master);
  ((s = mix_seed(s ^ mix_seed(static_cast<std::uint64_t>(ids) + 0x632be59bd9b4e019ULL))), ...);
  return s;
}

}  // namespace mfdist
