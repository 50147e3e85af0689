#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace srkmax {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// Output depends only on (key, counter), so any draw can be addressed directly
/// by (seed, replica, step, mode) without carrying generator state.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit Philox4x32(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  Counter operator()(Counter ctr) const {
    Key key = key_;
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static Counter single_round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = std::uint64_t(kMul0) * c[0];
    const std::uint64_t p1 = std::uint64_t(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }

  Key key_;
};

/// Two independent standard normals at stream address (replica, step, pair).
inline std::array<double, 2> normal_pair(const Philox4x32& gen, std::uint64_t replica,
                                         std::uint32_t step, std::uint32_t pair) {
  const auto out = gen({step, pair, static_cast<std::uint32_t>(replica),
                        static_cast<std::uint32_t>(replica >> 32)});
  const std::uint64_t a = (std::uint64_t(out[0]) << 32) | out[1];
  const std::uint64_t b = (std::uint64_t(out[2]) << 32) | out[3];
  // (0, 1] and [0, 1) with 53-bit resolution
  const double u1 = (double(a >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = double(b >> 11) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(theta), r * std::sin(theta)};
}

}  // namespace srkmax
