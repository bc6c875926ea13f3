#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace tlpo {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based stream for one (seed, replicate, subject) triple. Streams for
/// different triples never share state, so subjects can be generated in any order.
class SubjectStream {
 public:
  SubjectStream(std::uint64_t seed, std::uint64_t replicate, std::uint64_t subject) noexcept
      : key_(splitmix64(splitmix64(splitmix64(seed) ^ replicate) ^ (subject * 0xd1b54a32d192ed03ULL))) {}

  std::uint64_t next() noexcept { return splitmix64(key_ + 0x632be59bd9b4e019ULL * ++counter_); }

  /// Uniform on (0, 1), never 0 or 1.
  double uniform() noexcept { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double a, double b) noexcept { return a + (b - a) * uniform(); }

  /// Box-Muller; consumes exactly two uniforms.
  double normal(double mean = 0.0, double sd = 1.0) noexcept {
    const double u1 = uniform();
    const double u2 = uniform();
    return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t draws() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace tlpo
