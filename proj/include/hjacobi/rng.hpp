#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace hjacobi {

/// Philox4x32-10 counter-based generator.
///
/// The 128-bit counter is split into a 64-bit block index (low words) and a
/// 64-bit stream id (high words); the key is the 64-bit master seed. Distinct
/// (seed, stream) pairs give independent sequences, so path i of a batch can
/// be generated on any worker in any order.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;
  using counter_type = std::array<std::uint32_t, 4>;
  using key_type = std::array<std::uint32_t, 2>;

  Philox4x32() : Philox4x32(0, 0) {}
  Philox4x32(std::uint64_t seed, std::uint64_t stream) { reseed(seed, stream); }

  void reseed(std::uint64_t seed, std::uint64_t stream) {
    key_ = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    stream_ = stream;
    block_ = 0;
    pos_ = 4;
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (pos_ == 4) refill();
    return buffer_[pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = (*this)();
    return (hi << 32) | (*this)();
  }

  /// Uniform on (0, 1) with 53 random bits, never exactly 0 or 1.
  double uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Skips ahead to an absolute block index of the current stream.
  void seek_block(std::uint64_t block) {
    block_ = block;
    pos_ = 4;
  }

  static counter_type bijection(counter_type ctr, key_type key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  void refill() {
    const counter_type ctr = {static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                              static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
    buffer_ = bijection(ctr, key_);
    ++block_;
    pos_ = 0;
  }

  key_type key_{};
  std::uint64_t stream_ = 0;
  std::uint64_t block_ = 0;
  counter_type buffer_{};
  int pos_ = 4;
};

/// Standard normal pairs by the polar method; keeps its spare between calls.
class NormalSource {
 public:
  double operator()(Philox4x32& rng) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * rng.uniform_open() - 1.0;
      v = 2.0 * rng.uniform_open() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  void reset() { has_spare_ = false; }

 private:
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Exponential with the given rate.
inline double exponential(Philox4x32& rng, double rate) { return -std::log(rng.uniform_open()) / rate; }

/// Mixes a user-facing seed and a purpose tag into a derived master seed (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace hjacobi
