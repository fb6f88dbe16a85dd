#pragma once

#include <cstdint>
#include <vector>

#include "ordpool/error.hpp"

namespace ordpool {

/// Counter-based pseudo-random stream (splitmix64). Draw k of stream `seed`
/// is the pure function mix64(seed + k * 0x9E3779B97F4A7C15), so identical
/// (seed, position) pairs reproduce identical values on every platform; the
/// platform RNG is never used. Paired training arms and cross-language
/// reimplementations rely on this being the only source of randomness.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), pos_(0) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t position() const { return pos_; }
  void seek(std::uint64_t position) { pos_ = position; }

  static std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t next_u64() {
    ++pos_;
    return mix64(seed_ + pos_ * 0x9E3779B97F4A7C15ull);
  }

  /// One draw in [lo, hi). 53-bit mantissa construction: (u64 >> 11) * 2^-53.
  double uniform(double lo, double hi) {
    if (!(lo < hi)) throw RangeError("uniform requires lo < hi");
    const double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
  }

  /// `count` draws in [lo, hi); count == 0 returns empty without advancing.
  std::vector<double> uniform_vec(std::int64_t count, double lo, double hi) {
    if (count < 0) throw RangeError("uniform_vec requires count >= 0");
    if (!(lo < hi)) throw RangeError("uniform_vec requires lo < hi");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) out.push_back(lo + static_cast<double>(next_u64() >> 11) * 0x1.0p-53 * (hi - lo));
    return out;
  }

  /// Unbiased-enough bounded draw in [0, n): floor(u64 * n / 2^64).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw RangeError("below requires n >= 1");
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Fisher-Yates permutation of 0..n-1, high index first.
  std::vector<std::int64_t> shuffled_indices(std::int64_t n) {
    if (n < 1) throw RangeError("shuffled_indices requires n >= 1");
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (std::int64_t i = n - 1; i > 0; --i) {
      const auto j = static_cast<std::int64_t>(below(static_cast<std::uint64_t>(i + 1)));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    return idx;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t pos_;
};

/// Independent substream seed for (seed, tag); used to keep e.g. weight
/// initialization and batch shuffling on separate streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return RngStream::mix64(seed + RngStream::mix64(tag + 1) * 0x9E3779B97F4A7C15ull);
}

}  // namespace ordpool
