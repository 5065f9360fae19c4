#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace coolheat {

// Philox4x32-10 (Salmon et al., SC'11), the counter-based generator used
// for every stochastic draw in this library.
//
// Stream convention (pinned, version 1): key = {seed low 32 bits, seed high
// 32 bits}; counter = {block low, block high, stream low, stream high}. Each
// block yields four 32-bit words, consumed in order. A uniform double takes
// two consecutive words (a, b) and is ((a >> 5) * 2^26 + (b >> 6)) / 2^53.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Block generate(Block ctr, Key key) {
    constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      std::uint64_t p0 = static_cast<std::uint64_t>(m0) * ctr[0];
      std::uint64_t p1 = static_cast<std::uint64_t>(m1) * ctr[2];
      Block next = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
                    static_cast<std::uint32_t>(p1),
                    static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
                    static_cast<std::uint32_t>(p0)};
      ctr = next;
      key[0] += w0;
      key[1] += w1;
    }
    return ctr;
  }
};

inline constexpr int kRngStreamVersion = 1;

// One independent stream of a seeded Philox family.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  std::uint32_t next_u32() {
    if (used_ == 4) refill();
    return buffer_[used_++];
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    std::uint64_t a = next_u32() >> 5;
    std::uint64_t b = next_u32() >> 6;
    return (static_cast<double>(a) * 67108864.0 + static_cast<double>(b)) * (1.0 / 9007199254740992.0);
  }

  // Exponential variate with the given rate; -log(1 - u) keeps the argument
  // in (0, 1].
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

 private:
  void refill() {
    Philox4x32::Block ctr = {static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                             static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
    buffer_ = Philox4x32::generate(ctr, key_);
    ++block_;
    used_ = 0;
  }

  Philox4x32::Key key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Philox4x32::Block buffer_{};
  int used_ = 4;
};

}  // namespace coolheat
