#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace mediate::rng {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers: as
/// easy as 1, 2, 3"). Stateless: output depends only on (counter, key).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter block(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
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

/// Uniform on the open interval (0, 1) from 52 random bits; with 53 the top
/// value would round to 1.
constexpr double to_unit_open(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 12;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
}

/// Deterministic variates addressed by (seed, stream, unit, slot). Each slot
/// owns one Philox block, so a unit's draws do not depend on which other
/// units or slots were evaluated, or on thread scheduling.
class UnitStream {
 public:
  UnitStream(std::uint64_t seed, std::uint32_t stream, std::uint64_t unit) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        unit_(unit),
        stream_(stream) {}

  std::array<double, 2> uniforms(std::uint32_t slot) const noexcept {
    const auto out = Philox4x32::block(
        {static_cast<std::uint32_t>(unit_), static_cast<std::uint32_t>(unit_ >> 32), slot, stream_}, key_);
    return {to_unit_open(out[0], out[1]), to_unit_open(out[2], out[3])};
  }

  double uniform(std::uint32_t slot) const noexcept { return uniforms(slot)[0]; }

  /// Standard normal by Box-Muller on the slot's two uniforms.
  double normal(std::uint32_t slot) const noexcept {
    const auto u = uniforms(slot);
    return std::sqrt(-2.0 * std::log(u[0])) * std::cos(2.0 * std::numbers::pi * u[1]);
  }

 private:
  Philox4x32::Key key_;
  std::uint64_t unit_;
  std::uint32_t stream_;
};

}  // namespace mediate::rng
