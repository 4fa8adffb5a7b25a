// SPDX-License-Identifier: Apache-2.0
//
// Counter-based random numbers (Philox4x32-10). A generator is fully
// determined by a 64-bit key and a 64-bit stream id; the 128-bit counter is
// laid out as [block lo, block hi, stream lo, stream hi], so distinct stream
// ids never overlap and any stream can be created independently of the
// order in which other streams are consumed.
//
// Gaussian variates use Box-Muller on our own uniform mapping, so outputs are
// bit-identical across standard libraries.
#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>

namespace mmsebcd {

class Philox4x32 {
 public:
  using result_type = std::uint64_t;
  using block_type = std::array<std::uint32_t, 4>;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  Philox4x32(std::uint64_t key, std::uint64_t stream)
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
        stream_(stream) {}

  /// Ten-round bijection of one counter block under the given key.
  static block_type encrypt(block_type ctr, std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
    for (int r = 0; r < 10; ++r) {
      if (r > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

  result_type operator()() {
    if (pos_ >= 4) refill();
    const std::uint64_t lo = buf_[pos_++];
    const std::uint64_t hi = buf_[pos_++];
    return lo | (hi << 32);
  }

  /// Uniform on the open interval (0, 1) with 53 bits of resolution.
  double uniform() {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  /// Circularly-symmetric CN(0, 1): real and imaginary parts N(0, 1/2).
  std::complex<double> complex_normal() {
    const double s = std::sqrt(0.5);
    const double re = normal() * s;
    const double im = normal() * s;
    return {re, im};
  }

 private:
  void refill() {
    const block_type ctr{static_cast<std::uint32_t>(block_),
                         static_cast<std::uint32_t>(block_ >> 32),
                         static_cast<std::uint32_t>(stream_),
                         static_cast<std::uint32_t>(stream_ >> 32)};
    buf_ = encrypt(ctr, key_);
    ++block_;
    pos_ = 0;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  block_type buf_{};
  int pos_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Stream ids: purpose in the top byte, then two 28-bit indices.
enum class StreamPurpose : std::uint64_t { channel = 1, init = 2, seed = 3 };

inline std::uint64_t stream_id(StreamPurpose purpose, std::uint64_t a,
                               std::uint64_t b = 0) {
  constexpr std::uint64_t mask = (std::uint64_t{1} << 28) - 1;
  return (static_cast<std::uint64_t>(purpose) << 56) | ((a & mask) << 28) |
         (b & mask);
}

}  // namespace mmsebcd
