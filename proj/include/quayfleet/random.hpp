#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace quayfleet {

/// Stateless hashing RNG. Every draw is a pure function of its key so that
/// sensor noise and packet loss replay identically for the same seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_key(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (auto p : parts) h = splitmix64(h ^ p);
  return h;
}

/// Uniform double in [0, 1).
constexpr double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Time keys are quantised to microseconds.
inline std::uint64_t time_key(double t) {
  return static_cast<std::uint64_t>(std::llround(t * 1e6));
}

/// Standard normal draw keyed by `key` (Box-Muller).
inline double keyed_normal(std::uint64_t key) {
  const double u1 = 1.0 - to_unit(splitmix64(key));
  const double u2 = to_unit(splitmix64(key ^ 0x5851f42d4c957f2dULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Small sequential generator for scenario/job generation.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() { return splitmix64(state_++ * 0xd1342543de82ef95ULL); }
  double uniform() { return to_unit(next()); }
  /// Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<int>(next() % span);
  }

 private:
  std::uint64_t state_;
};

}  // namespace quayfleet
