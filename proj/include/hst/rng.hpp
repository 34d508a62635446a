#pragma once

#include <cmath>
#include <cstdint>

namespace hst {

// splitmix64 finalizer (Steele, Lea & Flood 2014). Used to spread seeds and
// to derive independent sub-stream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Deterministic seed for a named sub-stream of a base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  return mix64(base ^ mix64(stream ^ mix64(index)));
}

// 64-bit multiplicative congruential generator, state_{n+1} = state_n * M mod 2^64
// with M = 0xf1357aea2e62a9c5 (Steele & Vigna 2021, "Computationally easy,
// spectrally good multipliers for congruential pseudorandom number generators").
// The state stays odd, so the low bit carries no entropy; consumers only use
// the top bits.
class Mcg64 {
public:
  explicit Mcg64(std::uint64_t seed) : state_(mix64(seed) | 1ull) {}

  std::uint64_t next_u64() {
    state_ *= kMultiplier;
    return state_;
  }

  // Uniform in [0, 1), 53 usable bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). Lemire's multiply-shift; bias is negligible
  // for the small n used here and the mapping is deterministic.
  std::size_t next_index(std::size_t n) {
    using u128 = unsigned __int128;
    return static_cast<std::size_t>(
        (static_cast<u128>(next_u64()) * static_cast<u128>(n)) >> 64);
  }

  // Standard normal via Box-Muller. One value per call; the sine twin is
  // discarded to keep the stream position independent of call history.
  double next_gaussian() {
    double u1 = next_unit();
    double u2 = next_unit();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

private:
  static constexpr std::uint64_t kMultiplier = 0xf1357aea2e62a9c5ull;
  static constexpr double kPi = 3.14159265358979323846;
  std::uint64_t state_;
};

}  // namespace hst
