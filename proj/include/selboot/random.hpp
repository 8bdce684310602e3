#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <limits>

namespace selboot {

// SplitMix64 finalizer; used both as a standalone generator and to derive
// well-separated seeds for substreams.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed of the substream identified by (master, domain, a, b). Distinct keys
// give statistically independent streams; the same key always gives the same
// stream, so results do not depend on which worker evaluates which key.
constexpr std::uint64_t substream_seed(std::uint64_t master, std::uint64_t domain, std::uint64_t a,
                                       std::uint64_t b = 0) noexcept {
  std::uint64_t h = splitmix64(master ^ 0x6a09e667f3bcc909ULL);
  h = splitmix64(h ^ domain);
  h = splitmix64(h ^ a);
  return splitmix64(h ^ b);
}

// xoshiro256** (Blackman & Vigna). Satisfies UniformRandomBitGenerator so it
// plugs into the <random> distributions.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr Xoshiro256(std::uint64_t seed) noexcept {
    for (auto& word : state_) {
      seed += 0x9e3779b97f4a7c15ULL;
      word = splitmix64(seed);
    }
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    const std::uint64_t result = std::rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = std::rotl(state_[3], 45);
    return result;
  }

 private:
  std::array<std::uint64_t, 4> state_{};
};

// Stream domains keep bootstrap draws and simulated data from ever sharing a key.
namespace stream {
inline constexpr std::uint64_t bootstrap = 1;
inline constexpr std::uint64_t dataset = 2;
inline constexpr std::uint64_t dataset_bootstrap = 3;
}  // namespace stream

}  // namespace selboot
