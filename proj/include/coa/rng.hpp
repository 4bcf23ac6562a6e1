#pragma once

// Counter-based random numbers (Philox4x32-10). A generator is identified by
// (seed, stream); draws are a pure function of (seed, stream, draw index), so
// any number of workers can regenerate the same sequence independently.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace coa {

class Philox4x32 {
 public:
  using ctr_type = std::array<std::uint32_t, 4>;
  using key_type = std::array<std::uint32_t, 2>;

  static ctr_type block(ctr_type ctr, key_type key) {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
      key[0] += kW0;
      key[1] += kW1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

/// Sequential view over one Philox stream. Each block yields two 64-bit words.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  std::uint64_t next_u64() {
    if (have_ == 0) refill();
    --have_;
    return buf_[have_];
  }

  /// Uniform on (0, 1] with 53 random bits.
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; the second value of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double t = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  void refill() {
    const Philox4x32::ctr_type ctr{static_cast<std::uint32_t>(stream_),
                                   static_cast<std::uint32_t>(stream_ >> 32),
                                   static_cast<std::uint32_t>(counter_),
                                   static_cast<std::uint32_t>(counter_ >> 32)};
    const Philox4x32::key_type key{static_cast<std::uint32_t>(seed_),
                                   static_cast<std::uint32_t>(seed_ >> 32)};
    const auto out = Philox4x32::block(ctr, key);
    ++counter_;
    buf_[1] = (std::uint64_t{out[0]} << 32) | out[1];
    buf_[0] = (std::uint64_t{out[2]} << 32) | out[3];
    have_ = 2;
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 2> buf_{};
  int have_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace coa
