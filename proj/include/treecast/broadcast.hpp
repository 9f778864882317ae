#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "treecast/error.hpp"
#include "treecast/rng.hpp"
#include "treecast/signals.hpp"

namespace treecast {

/// Symmetric binary channel on every tree edge: a child copies its parent
/// with probability 1 - epsilon. p = 1 - 2 epsilon is the error-free rate and
/// beta the Ising inverse temperature with tanh(beta) = p.
struct ChannelParams {
  double epsilon = 0.0;
  double p = 1.0;
  double beta = std::numeric_limits<double>::infinity();

  static ChannelParams from_epsilon(double eps) {
    detail::require(std::isfinite(eps) && eps >= 0.0 && eps < 0.5,
                    "epsilon must lie in [0, 1/2), got " + std::to_string(eps));
    const double p = 1.0 - 2.0 * eps;
    return {eps, p, p >= 1.0 ? std::numeric_limits<double>::infinity() : std::atanh(p)};
  }

  static ChannelParams from_p(double p) {
    detail::require(std::isfinite(p) && p > 0.0 && p <= 1.0, "p must lie in (0, 1], got " + std::to_string(p));
    return {(1.0 - p) / 2.0, p, p >= 1.0 ? std::numeric_limits<double>::infinity() : std::atanh(p)};
  }
};

enum class RootMode {
  PinnedPlus,  // sigma_0 = +1, for conditional-on-root experiments
  Fair,        // sigma_0 uniform on {-1, +1}
};

inline GenerationSignals sample_root(const SeedSpec& seed, RootMode mode = RootMode::Fair) {
  if (mode == RootMode::PinnedPlus) return GenerationSignals(0, 1, true);
  Stream rng = seed.stream(0, Purpose::Root);
  return GenerationSignals(0, 1, rng.coin());
}

// Writes r copies of every parent value: child j of parent s sits at r*s + j.
inline GenerationSignals expand_generation(const GenerationSignals& parents, std::uint64_t r) {
  GenerationSignals children(parents.level() + 1, parents.size() * r, false);
  const auto words = parents.words();
  for (std::uint64_t w = 0; w < words.size(); ++w) {
    std::uint64_t bits = words[w];
    while (bits != 0) {
      const auto bit = static_cast<std::uint64_t>(std::countr_zero(bits));
      bits &= bits - 1;
      children.fill((w * 64 + bit) * r, r, true);
    }
  }
  return children;
}

/// One broadcast step: every parent spawns r children, each flipped
/// independently with probability epsilon. Child = parent XOR flip-mask, so a
/// global sign flip of the parents flips the children exactly.
inline GenerationSignals sample_next_generation(const GenerationSignals& parents, std::uint64_t r,
                                                const ChannelParams& ch, const SeedSpec& seed,
                                                const Budget& budget = {}) {
  detail::require(r >= 1, "branching rate must be >= 1");
  if (parents.size() > budget.vertices_per_level / r) {
    throw BudgetError("generation " + std::to_string(parents.level() + 1) + " would hold more than " +
                      std::to_string(budget.vertices_per_level) + " vertices");
  }
  GenerationSignals children = expand_generation(parents, r);
  if (ch.epsilon > 0.0) {
    Stream rng = seed.stream(static_cast<std::uint64_t>(children.level()), Purpose::Channel);
    for (auto& w : children.words()) w ^= bernoulli_word(rng, ch.epsilon);
    children.clear_tail();
  }
  return children;
}

// S_n = (#plus) - (#minus).
inline std::int64_t majority_statistic(const GenerationSignals& g) noexcept {
  return 2 * static_cast<std::int64_t>(g.plus_count()) - static_cast<std::int64_t>(g.size());
}

// Majority statistic restricted to the first `count` entries.
inline std::int64_t majority_statistic(const GenerationSignals& g, std::uint64_t count) noexcept {
  return 2 * static_cast<std::int64_t>(g.plus_count(0, count)) - static_cast<std::int64_t>(count);
}

}  // namespace treecast
