#ifndef MRD_RANDOM_HPP
#define MRD_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace mrd {

// SplitMix64 finalizer (Steele, Lea & Flood 2014).
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based stream: the n-th 64-bit word of stream (seed, index) is
// splitmix64_mix(key + (n + 1) * golden), key = mix(seed ^ mix(index + golden)).
// Any position can be reached in O(1), so work split across threads draws
// exactly the same numbers as a serial run.
//
// Normals come from Box-Muller on consecutive uniform pairs: normal number
// 2k and 2k+1 use words 2k and 2k+1, independent of how many normals were
// requested before.
class CounterStream {
 public:
  using result_type = std::uint64_t;
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  CounterStream(std::uint64_t seed, std::uint64_t index)
      : key_(splitmix64_mix(seed ^ splitmix64_mix(index + kGolden))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return word(counter_++); }

  result_type word(std::uint64_t n) const { return splitmix64_mix(key_ + (n + 1) * kGolden); }

  // Uniform on the open interval (0, 1).
  double uniform() { return to_open_unit(operator()()); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = to_open_unit(word(counter_));
    const double u2 = to_open_unit(word(counter_ + 1));
    counter_ += 2;
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  // Positions the normal sequence so the next normal() is normal number n.
  void seek_normal(std::uint64_t n) {
    counter_ = 2 * (n / 2);
    has_spare_ = false;
    if (n % 2 == 1) normal();
  }

  std::uint64_t key() const { return key_; }

 private:
  static double to_open_unit(std::uint64_t w) {
    return (static_cast<double>(w >> 11) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mrd

#endif  // MRD_RANDOM_HPP
