#ifndef TREKRANK_RNG_HPP
#define TREKRANK_RNG_HPP

#include <cmath>
#include <cstdint>

namespace trekrank {

/// Counter-based generator: output k is a pure function of (seed, k), so a
/// stream can be consumed sequentially or addressed at random with identical
/// results. SplitMix64 finalizer over a Weyl sequence.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  static std::uint64_t value(std::uint64_t seed, std::uint64_t counter) {
    std::uint64_t z = seed + (counter + 1) * 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Derive an independent sub-stream seed (cells, replications, attempts).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    return value(seed ^ 0x6a09e667f3bcc909ull, stream);
  }

  static double unit_at(std::uint64_t seed, std::uint64_t counter) {
    return static_cast<double>(value(seed, counter) >> 11) * 0x1.0p-53;
  }

  /// Standard normal addressed by index; consumes counters 2k and 2k+1.
  static double normal_at(std::uint64_t seed, std::uint64_t k) {
    double u1 = 1.0 - unit_at(seed, 2 * k);  // (0, 1]
    double u2 = unit_at(seed, 2 * k + 1);
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  std::uint64_t next_u64() { return value(seed_, counter_++); }

  /// Uniform in [0, 1).
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  double normal() {
    double u1 = 1.0 - next_unit();
    double u2 = next_unit();
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace trekrank

#endif  // TREKRANK_RNG_HPP
