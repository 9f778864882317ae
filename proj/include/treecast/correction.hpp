#pragma once

#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "treecast/broadcast.hpp"
#include "treecast/error.hpp"
#include "treecast/rng.hpp"
#include "treecast/signals.hpp"
#include "treecast/tree.hpp"

namespace treecast {

enum class SchemeKind {
  Identity,
  BlockMajorityEveryStep,
  WithinDescentMajority,
  FractionIdentification,
  MinorityRemovalEveryStep,
  WithinDescentMinorityRemoval,
};

/// Which in-flight transform is applied and at which levels. Ties are always
/// broken by a fair coin.
struct CorrectionScheme {
  SchemeKind kind = SchemeKind::Identity;
  std::uint64_t block_size = 1;  // M, for the every-step variants
  int period = 1;                // k, for the within-descent variants

  static CorrectionScheme identity() { return {}; }
  static CorrectionScheme block_majority(std::uint64_t m) { return checked({SchemeKind::BlockMajorityEveryStep, m, 1}); }
  static CorrectionScheme descent_majority(int k) { return checked({SchemeKind::WithinDescentMajority, 1, k}); }
  static CorrectionScheme fraction_identification(int k) { return checked({SchemeKind::FractionIdentification, 1, k}); }
  static CorrectionScheme minority_removal(std::uint64_t m) {
    return checked({SchemeKind::MinorityRemovalEveryStep, m, 1});
  }
  static CorrectionScheme descent_minority_removal(int k) {
    return checked({SchemeKind::WithinDescentMinorityRemoval, 1, k});
  }

  [[nodiscard]] bool every_step() const noexcept {
    return kind == SchemeKind::BlockMajorityEveryStep || kind == SchemeKind::MinorityRemovalEveryStep;
  }
  [[nodiscard]] bool within_descent() const noexcept {
    return kind == SchemeKind::WithinDescentMajority || kind == SchemeKind::FractionIdentification ||
           kind == SchemeKind::WithinDescentMinorityRemoval;
  }
  [[nodiscard]] bool removes_minority() const noexcept {
    return kind == SchemeKind::MinorityRemovalEveryStep || kind == SchemeKind::WithinDescentMinorityRemoval;
  }

  // Level of the renormalized root: 0, n~ = max{j : r^j <= M}, or k.
  [[nodiscard]] int start_level(std::uint64_t r) const {
    if (every_step()) return first_block_level(block_size, r);
    if (within_descent()) return period;
    return 0;
  }

  [[nodiscard]] bool corrects_at(int level, std::uint64_t r) const {
    if (every_step()) return level >= start_level(r);
    if (within_descent()) return level > 0 && level % period == 0;
    return false;
  }

  // Block size used at `level`; the first every-step level is one block.
  [[nodiscard]] std::uint64_t block_size_at(int level, std::uint64_t r, std::uint64_t level_size) const {
    if (every_step()) return level == start_level(r) ? level_size : block_size;
    if (within_descent()) return ipow(r, period);
    return level_size;
  }

  [[nodiscard]] std::string describe() const {
    switch (kind) {
      case SchemeKind::Identity: return "identity";
      case SchemeKind::BlockMajorityEveryStep: return "block-majority:" + std::to_string(block_size);
      case SchemeKind::WithinDescentMajority: return "descent-majority:" + std::to_string(period);
      case SchemeKind::FractionIdentification: return "fraction:" + std::to_string(period);
      case SchemeKind::MinorityRemovalEveryStep: return "minority-removal:" + std::to_string(block_size);
      case SchemeKind::WithinDescentMinorityRemoval: return "descent-minority:" + std::to_string(period);
    }
    return "unknown";
  }

  // Inverse of describe(): "name" or "name:value".
  static CorrectionScheme parse(std::string_view text) {
    const auto colon = text.find(':');
    const std::string_view name = text.substr(0, colon);
    std::uint64_t value = 0;
    const bool has_value = colon != std::string_view::npos;
    if (has_value) {
      const auto digits = text.substr(colon + 1);
      const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
      detail::require(ec == std::errc{} && ptr == digits.data() + digits.size() && value >= 1,
                      "bad scheme parameter in '" + std::string(text) + "'");
    }
    if (name == "identity" || name == "none") {
      detail::require(!has_value, "identity takes no parameter");
      return identity();
    }
    detail::require(has_value, "scheme '" + std::string(name) + "' needs a parameter, e.g. '" + std::string(name) + ":2'");
    detail::require(value <= (1U << 30), "scheme parameter too large");
    if (name == "block-majority") return block_majority(value);
    if (name == "descent-majority") return descent_majority(static_cast<int>(value));
    if (name == "fraction") return fraction_identification(static_cast<int>(value));
    if (name == "minority-removal") return minority_removal(value);
    if (name == "descent-minority") return descent_minority_removal(static_cast<int>(value));
    throw DomainError("unknown scheme '" + std::string(name) + "'");
  }

  friend bool operator==(const CorrectionScheme&, const CorrectionScheme&) = default;

 private:
  static CorrectionScheme checked(CorrectionScheme s) {
    detail::require(s.block_size >= 1, "block size M must be >= 1");
    detail::require(s.period >= 1, "period k must be >= 1");
    return s;
  }
};

/// A generation after (possibly) applying a correction.
struct CorrectedGeneration {
  GenerationSignals signals;
  SchemeKind applied = SchemeKind::Identity;
  std::uint64_t block_size = 0;               // 0 when no correction ran at this level
  std::uint64_t covered = 0;                  // leading entries that enter statistics
  std::optional<IndexRange> excluded;         // 1-based leftover range
  std::optional<std::vector<std::uint64_t>> survivors;  // 0-based, minority removal only
  std::uint64_t tied_blocks = 0;

  [[nodiscard]] int level() const noexcept { return signals.level(); }
  [[nodiscard]] bool corrected() const noexcept { return block_size != 0; }

  static CorrectedGeneration uncorrected(GenerationSignals g) {
    CorrectedGeneration cg;
    cg.covered = g.size();
    cg.signals = std::move(g);
    return cg;
  }
};

namespace detail {

inline void check_partition(const GenerationSignals& g, const BlockPartition& part) {
  require(part.block_size >= 1, "partition block size must be >= 1");
  require(part.level_size == g.size(),
          "partition covers " + std::to_string(part.level_size) + " vertices but the generation has " +
              std::to_string(g.size()));
  require(!part.level || *part.level == g.level(),
          "partition is for level " + std::to_string(part.level.value_or(-1)) + " but the generation is level " +
              std::to_string(g.level()));
}

// Majority sign of block [first, first + size); ties resolved by `coin`
// XOR the first member's bit, a fair coin that commutes with global flips.
template <class CoinSource>
inline bool block_majority_sign(const GenerationSignals& g, std::uint64_t first, std::uint64_t size, CoinSource&& coin,
                                bool& tied) {
  const std::uint64_t plus = g.plus_count(first, size);
  const std::uint64_t minus = size - plus;
  tied = plus == minus;
  if (!tied) return plus > minus;
  return coin() != g.is_plus(first);
}

// Tie coins are keyed by block index, so a block's output depends only on
// its own members.
inline std::uint64_t tie_key(const GenerationSignals& g, const SeedSpec& seed) {
  return seed.stream(static_cast<std::uint64_t>(g.level()), Purpose::Tie)();
}

inline bool tie_coin(std::uint64_t key, std::uint64_t block) noexcept { return (mix64(key ^ (block + 1)) >> 63) != 0; }

inline CorrectedGeneration start_output(const GenerationSignals& g, const BlockPartition& part, SchemeKind kind) {
  CorrectedGeneration out;
  out.signals = g;
  out.applied = kind;
  out.block_size = part.block_size;
  out.covered = part.covered();
  out.excluded = part.leftover();
  return out;
}

}  // namespace detail

/// Overwrites every block with its majority sign (fair coin on ties). The
/// leftover is left untouched and marked excluded.
inline CorrectedGeneration apply_block_majority(const GenerationSignals& g, const BlockPartition& part,
                                                const SeedSpec& seed) {
  detail::check_partition(g, part);
  CorrectedGeneration out = detail::start_output(g, part, SchemeKind::BlockMajorityEveryStep);
  const std::uint64_t key = detail::tie_key(g, seed);
  for (std::uint64_t b = 0; b < part.block_count(); ++b) {
    const std::uint64_t first = b * part.block_size;
    bool tied = false;
    const bool plus =
        detail::block_majority_sign(g, first, part.block_size, [&] { return detail::tie_coin(key, b); }, tied);
    out.tied_blocks += tied ? 1 : 0;
    out.signals.fill(first, part.block_size, plus);
  }
  return out;
}

inline CorrectedGeneration apply_block_majority(const GenerationSignals& g, const DescentBlockPartition& part,
                                                const SeedSpec& seed) {
  auto out = apply_block_majority(g, part.blocks, seed);
  out.applied = SchemeKind::WithinDescentMajority;
  return out;
}

/// Overwrites every block with the value of one uniformly chosen member.
inline CorrectedGeneration apply_fraction_identification(const GenerationSignals& g, const BlockPartition& part,
                                                         const SeedSpec& seed) {
  detail::check_partition(g, part);
  CorrectedGeneration out = detail::start_output(g, part, SchemeKind::FractionIdentification);
  Stream rng = seed.stream(static_cast<std::uint64_t>(g.level()), Purpose::Fraction);
  for (std::uint64_t b = 0; b < part.block_count(); ++b) {
    const std::uint64_t first = b * part.block_size;
    const bool plus = g.is_plus(first + rng.below(part.block_size));
    out.signals.fill(first, part.block_size, plus);
  }
  return out;
}

inline CorrectedGeneration apply_fraction_identification(const GenerationSignals& g,
                                                         const DescentBlockPartition& part, const SeedSpec& seed) {
  return apply_fraction_identification(g, part.blocks, seed);
}

/// Keeps only the members of each block that carry its majority sign. On a
/// tie a fair coin picks the surviving sign, so exactly half survive. The
/// leftover has no survivors.
inline CorrectedGeneration apply_minority_removal(const GenerationSignals& g, const BlockPartition& part,
                                                  const SeedSpec& seed) {
  detail::check_partition(g, part);
  CorrectedGeneration out = detail::start_output(g, part, SchemeKind::MinorityRemovalEveryStep);
  const std::uint64_t key = detail::tie_key(g, seed);
  std::vector<std::uint64_t> survivors;
  survivors.reserve(part.covered());
  for (std::uint64_t b = 0; b < part.block_count(); ++b) {
    const std::uint64_t first = b * part.block_size;
    bool tied = false;
    const bool plus =
        detail::block_majority_sign(g, first, part.block_size, [&] { return detail::tie_coin(key, b); }, tied);
    out.tied_blocks += tied ? 1 : 0;
    for (std::uint64_t i = first; i < first + part.block_size; ++i) {
      if (g.is_plus(i) == plus) survivors.push_back(i);
    }
  }
  out.survivors = std::move(survivors);
  return out;
}

inline CorrectedGeneration apply_minority_removal(const GenerationSignals& g, const DescentBlockPartition& part,
                                                  const SeedSpec& seed) {
  auto out = apply_minority_removal(g, part.blocks, seed);
  out.applied = SchemeKind::WithinDescentMinorityRemoval;
  return out;
}

/// The surviving vertices of a minority-removal step as a compact generation;
/// for other schemes the covered prefix.
inline GenerationSignals survivors_only(const CorrectedGeneration& cg) {
  if (!cg.survivors) {
    GenerationSignals g = cg.signals;
    g.truncate(cg.covered);
    return g;
  }
  GenerationSignals g(cg.level(), cg.survivors->size(), false);
  for (std::uint64_t j = 0; j < cg.survivors->size(); ++j) g.set(j, cg.signals.is_plus((*cg.survivors)[j]));
  return g;
}

// Majority statistic over the vertices that count: survivors, or the
// covered prefix.
inline std::int64_t majority_statistic(const CorrectedGeneration& cg) {
  if (!cg.survivors) return majority_statistic(cg.signals, cg.covered);
  std::int64_t s = 0;
  for (const auto i : *cg.survivors) s += cg.signals[i];
  return s;
}

/// One value per block: the common value of the block (of its survivors
/// after minority removal). Throws if a block is not constant. The result
/// keeps the level of the input generation.
inline GenerationSignals renormalize(const CorrectedGeneration& cg, const BlockPartition& part) {
  detail::check_partition(cg.signals, part);
  GenerationSignals out(cg.level(), part.block_count(), false);
  if (cg.survivors) {
    const auto& surv = *cg.survivors;
    std::uint64_t j = 0;
    for (std::uint64_t b = 0; b < part.block_count(); ++b) {
      const std::uint64_t end = (b + 1) * part.block_size;
      std::optional<bool> value;
      for (; j < surv.size() && surv[j] < end; ++j) {
        const bool plus = cg.signals.is_plus(surv[j]);
        if (value && *value != plus) throw DomainError("survivors of block " + std::to_string(b) + " disagree");
        value = plus;
      }
      if (!value) throw DomainError("block " + std::to_string(b) + " has no survivors");
      out.set(b, *value);
    }
    return out;
  }
  for (std::uint64_t b = 0; b < part.block_count(); ++b) {
    const std::uint64_t first = b * part.block_size;
    const std::uint64_t plus = cg.signals.plus_count(first, part.block_size);
    if (plus != 0 && plus != part.block_size) {
      throw DomainError("block " + std::to_string(b) + " is not constant; correction must precede renormalization");
    }
    out.set(b, plus != 0);
  }
  return out;
}

inline GenerationSignals renormalize(const CorrectedGeneration& cg, const DescentBlockPartition& part) {
  return renormalize(cg, part.blocks);
}

struct TrajectoryOptions {
  RootMode root = RootMode::PinnedPlus;
  // Force the first corrected level (the renormalized root) to all +1.
  bool pin_renormalized_root = false;
  Budget budget{};
};

// Applies `scheme` to a freshly generated level-n generation.
inline CorrectedGeneration apply_scheme(const CorrectionScheme& scheme, std::uint64_t r, GenerationSignals g,
                                        const SeedSpec& seed) {
  const int n = g.level();
  if (!scheme.corrects_at(n, r)) return CorrectedGeneration::uncorrected(std::move(g));
  const auto part = partition_consecutive(n, g.size(), scheme.block_size_at(n, r, g.size()));
  CorrectedGeneration out;
  switch (scheme.kind) {
    case SchemeKind::BlockMajorityEveryStep:
    case SchemeKind::WithinDescentMajority: out = apply_block_majority(g, part, seed); break;
    case SchemeKind::FractionIdentification: out = apply_fraction_identification(g, part, seed); break;
    case SchemeKind::MinorityRemovalEveryStep:
    case SchemeKind::WithinDescentMinorityRemoval: out = apply_minority_removal(g, part, seed); break;
    case SchemeKind::Identity: return CorrectedGeneration::uncorrected(std::move(g));
  }
  out.applied = scheme.kind;
  return out;
}

/// Runs broadcast steps interleaved with `scheme`, calling visit(cg) for
/// levels 0..depth. After minority removal only survivors branch; leftover
/// vertices of a consecutive partition are discarded and have no
/// descendants.
template <class Visitor>
void simulate_trajectory(std::uint64_t r, const CorrectionScheme& scheme, const ChannelParams& ch, int depth,
                         const SeedSpec& seed, const TrajectoryOptions& opt, Visitor&& visit) {
  detail::require(r >= 2, "branching rate r must be >= 2");
  detail::require(depth >= 0, "depth must be >= 0");
  if (scheme.within_descent()) {
    detail::require(depth % scheme.period == 0, "depth " + std::to_string(depth) +
                                                    " is not a multiple of the correction period k=" +
                                                    std::to_string(scheme.period));
  }
  const int pin_level = scheme.start_level(r);
  GenerationSignals root = sample_root(seed, opt.root);
  if (opt.pin_renormalized_root && pin_level == 0) root = GenerationSignals(0, 1, true);
  CorrectedGeneration cg = CorrectedGeneration::uncorrected(std::move(root));
  visit(static_cast<const CorrectedGeneration&>(cg));
  for (int n = 1; n <= depth; ++n) {
    const GenerationSignals parents = survivors_only(cg);
    GenerationSignals g = sample_next_generation(parents, r, ch, seed, opt.budget);
    if (opt.pin_renormalized_root && n == pin_level) g = GenerationSignals(n, g.size(), true);
    cg = apply_scheme(scheme, r, std::move(g), seed);
    visit(static_cast<const CorrectedGeneration&>(cg));
  }
}

inline std::vector<CorrectedGeneration> run_corrected_trajectory(const RegularTreeSpec& spec,
                                                                 const CorrectionScheme& scheme,
                                                                 const ChannelParams& ch, int depth,
                                                                 const SeedSpec& seed,
                                                                 const TrajectoryOptions& opt = {}) {
  detail::require(depth <= spec.depth(), "trajectory depth exceeds the tree spec depth");
  std::vector<CorrectedGeneration> out;
  out.reserve(static_cast<std::size_t>(depth) + 1);
  simulate_trajectory(spec.r(), scheme, ch, depth, seed, opt,
                      [&out](const CorrectedGeneration& cg) { out.push_back(cg); });
  return out;
}

/// Offspring counts of the renormalized random tree of a minority-removal
/// trajectory: for every corrected level after the first, the number of
/// blocks descending from each block one correction earlier.
inline RandomTreeSample offspring_counts(const std::vector<CorrectedGeneration>& trajectory,
                                         const CorrectionScheme& scheme, std::uint64_t r) {
  detail::require(scheme.removes_minority(), "offspring counts need a minority-removal scheme");
  RandomTreeSample sample;
  const CorrectedGeneration* prev = nullptr;
  for (const auto& cg : trajectory) {
    if (!cg.corrected()) continue;
    if (prev != nullptr) {
      // Each surviving vertex of `prev` has r^gap descendants here, laid out
      // consecutively; count whole blocks per previous block.
      const int gap = cg.level() - prev->level();
      const std::uint64_t fan = ipow(r, gap);
      const auto& surv = *prev->survivors;
      std::vector<std::uint32_t> counts(prev->covered / prev->block_size, 0);
      std::uint64_t start = 0;
      std::uint64_t j = 0;
      for (std::uint64_t b = 0; b < counts.size(); ++b) {
        const std::uint64_t end = (b + 1) * prev->block_size;
        std::uint64_t members = 0;
        for (; j < surv.size() && surv[j] < end; ++j) ++members;
        // Blocks are consecutive in the child generation; a block belongs to
        // the parent block holding its first member.
        const std::uint64_t child_first = start * fan;
        const std::uint64_t child_last = (start + members) * fan;
        const std::uint64_t first_block = (child_first + cg.block_size - 1) / cg.block_size;
        const std::uint64_t last_block = std::min(child_last / cg.block_size, cg.covered / cg.block_size);
        counts[b] = static_cast<std::uint32_t>(last_block > first_block ? last_block - first_block : 0);
        start += members;
      }
      sample.offspring_counts.push_back(std::move(counts));
    }
    prev = &cg;
  }
  return sample;
}

}  // namespace treecast
