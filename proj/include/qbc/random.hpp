#pragma once

// Counter-based, splittable random stream.
//
// Every probabilistic operation in the library takes a RandomStream by
// reference; there is no global generator. Output i of a stream with key k is
// mix(k + (i + 1) * golden), i.e. SplitMix64 evaluated at an explicit counter,
// so a stream can be split deterministically into independent children.

#include <cstdint>
#include <limits>
#include <stdexcept>

namespace qbc {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed) noexcept
      : key_(detail::mix64(seed ^ 0x6A09E667F3BCC909ULL)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept { return next_u64(); }

  std::uint64_t next_u64() noexcept {
    ++counter_;
    return detail::mix64(key_ + counter_ * detail::kGolden);
  }

  /// Uniform double in [0, 1) with 53 bits of resolution.
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) noexcept {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return uniform() < p;
  }

  /// Unbiased integer in [0, n) by rejection sampling.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: empty range");
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t draw = next_u64();
    while (draw >= limit) draw = next_u64();
    return draw % n;
  }

  /// Independent child stream; the parent's counter is not advanced.
  RandomStream split(std::uint64_t child) const noexcept {
    RandomStream out(0);
    out.key_ = detail::mix64(key_ ^ detail::mix64((child + 1) * 0xD1B54A32D192ED03ULL));
    return out;
  }

  std::uint64_t draws() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace qbc
