#pragma once

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A stream is
// addressed by (seed, rep, stream); draws within it advance a 64-bit block
// counter. Satisfies UniformRandomBitGenerator, so std distributions apply.

#include <array>
#include <cstdint>
#include <limits>

namespace sdr {

class Philox4x32 {
 public:
  using result_type = std::uint32_t;
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  /// Ten-round bijection of one counter block under `key`.
  static Block generate_block(Block ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

  Philox4x32(std::uint64_t seed, std::uint32_t rep, std::uint32_t stream)
      : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)}, rep_(rep), stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (pos_ == 4) {
      buffer_ = generate_block({std::uint32_t(block_), std::uint32_t(block_ >> 32), rep_, stream_},
                               key_);
      ++block_;
      pos_ = 0;
    }
    return buffer_[pos_++];
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static Block single_round(const Block& c, const Key& k) {
    const std::uint64_t p0 = std::uint64_t(kMul0) * c[0];
    const std::uint64_t p1 = std::uint64_t(kMul1) * c[2];
    return {std::uint32_t(p1 >> 32) ^ c[1] ^ k[0], std::uint32_t(p1),
            std::uint32_t(p0 >> 32) ^ c[3] ^ k[1], std::uint32_t(p0)};
  }

  Key key_;
  std::uint32_t rep_;
  std::uint32_t stream_;
  std::uint64_t block_ = 0;
  Block buffer_{};
  int pos_ = 4;
};

}  // namespace sdr
