#pragma once

// Counter-based random streams (Philox4x32-10, Salmon et al. SC'11).
// A stream is identified by (seed, stream id); draw k of stream s is a pure
// function of (seed, s, k), so results do not depend on how paths are
// scheduled across threads.

#include <array>
#include <cmath>
#include <cstdint>

namespace densctl {

class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Block generate(Block ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

/// Standard normals (Box-Muller) and uniforms from one Philox stream.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}, stream_(stream) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() {
    if (available_ < 2) refill();
    const std::uint64_t hi = bits_[4 - available_];
    const std::uint64_t lo = bits_[5 - available_];
    available_ -= 2;
    return static_cast<double>(((hi << 32) | lo) >> 11) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  std::uint64_t below(std::uint64_t n) {
    if (available_ < 2) refill();
    const std::uint64_t hi = bits_[4 - available_];
    const std::uint64_t lo = bits_[5 - available_];
    available_ -= 2;
    return ((hi << 32) | lo) % n;
  }

 private:
  void refill() {
    const Philox4x32::Block ctr{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                                static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
    bits_ = Philox4x32::generate(ctr, key_);
    ++block_;
    available_ = 4;
  }

  Philox4x32::Key key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Philox4x32::Block bits_{};
  int available_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace densctl
