#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

namespace treecast {

// Tags separating the independent random streams used by one replicate.
enum class Purpose : std::uint32_t {
  Root = 1,
  Channel = 2,
  Tie = 3,
  Fraction = 4,
  FkEdge = 5,
  FkSpin = 6,
  TreeShape = 7,
  Generic = 8,
};

// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// xoshiro256** generator. Satisfies UniformRandomBitGenerator.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t key) noexcept {
    std::uint64_t s = key;
    for (auto& word : state_) {
      s += 0x9e3779b97f4a7c15ULL;
      word = mix64(s);
    }
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
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

  // Uniform in [0, 1) with 53 bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  bool coin() noexcept { return ((*this)() >> 63) != 0; }

  // Uniform in [0, n), Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t n) noexcept {
    if (n <= 1) return 0;
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>((*this)()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

 private:
  std::array<std::uint64_t, 4> state_{};
};

/// Seed contract: a stream is a pure function of
/// (master_seed, replicate, level, purpose), so results never depend on
/// scheduling or worker count.
struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t replicate = 0;

  [[nodiscard]] SeedSpec for_replicate(std::uint64_t rep) const noexcept { return {master_seed, rep}; }

  [[nodiscard]] Stream stream(std::uint64_t level, Purpose purpose) const noexcept {
    std::uint64_t h = mix64(master_seed);
    h = mix64(h ^ replicate);
    h = mix64(h ^ level);
    h = mix64(h ^ static_cast<std::uint64_t>(purpose));
    return Stream(h);
  }
};

/// A 64-bit word whose bits are independent Bernoulli(prob) draws.
///
/// Each lane compares a lazily generated uniform against the binary
/// expansion of `prob`; a lane is decided at its first differing bit, so the
/// expected cost is a handful of generator calls per word and the result is
/// exact for the double value of `prob`.
inline std::uint64_t bernoulli_word(Stream& rng, double prob) noexcept {
  if (prob <= 0.0) return 0;
  if (prob >= 1.0) return ~std::uint64_t{0};
  std::uint64_t undecided = ~std::uint64_t{0};
  std::uint64_t result = 0;
  double rest = prob;
  for (int i = 0; i < 1100 && undecided != 0 && rest > 0.0; ++i) {
    rest *= 2.0;
    std::uint64_t digit = 0;
    if (rest >= 1.0) {
      digit = ~std::uint64_t{0};
      rest -= 1.0;
    }
    const std::uint64_t u = rng();
    const std::uint64_t less = ~u & digit & undecided;
    const std::uint64_t greater = u & ~digit & undecided;
    result |= less;
    undecided &= ~(less | greater);
  }
  return result;
}

}  // namespace treecast
