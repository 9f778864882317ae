#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "treecast/error.hpp"

namespace treecast {

// r^n, or nullopt when it does not fit in 64 bits.
constexpr std::optional<std::uint64_t> checked_pow(std::uint64_t r, int n) noexcept {
  std::uint64_t v = 1;
  for (int i = 0; i < n; ++i) {
    if (r != 0 && v > std::numeric_limits<std::uint64_t>::max() / r) return std::nullopt;
    v *= r;
  }
  return v;
}

inline std::uint64_t ipow(std::uint64_t r, int n) {
  const auto v = checked_pow(r, n);
  if (!v) throw BudgetError(std::to_string(r) + "^" + std::to_string(n) + " overflows 64 bits");
  return *v;
}

// Vertex (n, s) of a regular tree; s is 1-based within level n.
struct Vertex {
  int level = 0;
  std::uint64_t index = 1;

  friend bool operator==(const Vertex&, const Vertex&) = default;
};

// Inclusive 1-based index range [first, last] within one level.
struct IndexRange {
  std::uint64_t first = 1;
  std::uint64_t last = 0;

  [[nodiscard]] std::uint64_t size() const noexcept { return last >= first ? last - first + 1 : 0; }
  [[nodiscard]] bool contains(std::uint64_t s) const noexcept { return s >= first && s <= last; }

  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// Regular tree with forward branching r, truncated at `depth`.
class RegularTreeSpec {
 public:
  RegularTreeSpec(std::uint64_t r, int depth, const Budget& budget = {}) : r_(r), depth_(depth) {
    detail::require(r >= 2, "branching rate r must be >= 2");
    detail::require(depth >= 0, "depth must be >= 0");
    const auto widest = checked_pow(r, depth);
    if (!widest || *widest > budget.vertices_per_level) {
      throw BudgetError("level " + std::to_string(depth) + " of T^(" + std::to_string(r) +
                        ") exceeds the vertex budget of " + std::to_string(budget.vertices_per_level) +
                        " per level");
    }
  }

  [[nodiscard]] std::uint64_t r() const noexcept { return r_; }
  [[nodiscard]] int depth() const noexcept { return depth_; }

  [[nodiscard]] std::uint64_t level_size(int n) const {
    detail::require(n >= 0 && n <= depth_, "level " + std::to_string(n) + " outside [0, depth]");
    return ipow(r_, n);
  }

 private:
  std::uint64_t r_;
  int depth_;
};

inline void check_vertex(const Vertex& v, const RegularTreeSpec& spec) {
  detail::require(v.level >= 0 && v.level <= spec.depth(), "vertex level out of range");
  detail::require(v.index >= 1 && v.index <= spec.level_size(v.level), "vertex index out of range");
}

/// The r children of v at level v.level + 1.
inline IndexRange children_range(const Vertex& v, const RegularTreeSpec& spec) {
  check_vertex(v, spec);
  detail::require(v.level < spec.depth(), "vertex at maximal depth has no children in this spec");
  const std::uint64_t r = spec.r();
  return {(v.index - 1) * r + 1, v.index * r};
}

/// Predecessor (n - 1, ceil(s / r)).
inline Vertex parent_of(const Vertex& v, const RegularTreeSpec& spec) {
  check_vertex(v, spec);
  detail::require(v.level > 0, "the root has no parent");
  return {v.level - 1, (v.index + spec.r() - 1) / spec.r()};
}

/// Consecutive blocks of `block_size` indices covering a level; the tail that
/// does not fill a whole block is the leftover and is excluded downstream.
struct BlockPartition {
  std::optional<int> level;
  std::uint64_t level_size = 0;
  std::uint64_t block_size = 1;

  [[nodiscard]] std::uint64_t block_count() const noexcept { return level_size / block_size; }
  [[nodiscard]] std::uint64_t covered() const noexcept { return block_count() * block_size; }

  // Block b (0-based) as a 1-based index range.
  [[nodiscard]] IndexRange block(std::uint64_t b) const noexcept {
    return {b * block_size + 1, (b + 1) * block_size};
  }

  [[nodiscard]] std::optional<IndexRange> leftover() const noexcept {
    if (covered() == level_size) return std::nullopt;
    return IndexRange{covered() + 1, level_size};
  }

  // 0-based block containing 1-based index s, or nullopt for the leftover.
  [[nodiscard]] std::optional<std::uint64_t> block_of(std::uint64_t s) const noexcept {
    if (s == 0 || s > covered()) return std::nullopt;
    return (s - 1) / block_size;
  }
};

inline BlockPartition partition_consecutive(std::uint64_t level_size, std::uint64_t block_size) {
  detail::require(block_size >= 1, "block size M must be >= 1");
  return {std::nullopt, level_size, block_size};
}

inline BlockPartition partition_consecutive(int level, std::uint64_t level_size, std::uint64_t block_size) {
  auto part = partition_consecutive(level_size, block_size);
  part.level = level;
  return part;
}

/// Blocks of r^k level-`level` vertices, each the full descent of one vertex
/// k generations up.
struct DescentBlockPartition {
  int level = 0;
  int k = 1;
  std::uint64_t r = 2;
  BlockPartition blocks;

  // Level-(level - k) ancestor whose descendants form block b.
  [[nodiscard]] Vertex ancestor(std::uint64_t b) const noexcept { return {level - k, b + 1}; }
};

inline DescentBlockPartition descent_partition(int level, int k, const RegularTreeSpec& spec) {
  detail::require(k >= 1, "correction period k must be >= 1");
  detail::require(level > 0 && level % k == 0,
                  "level " + std::to_string(level) + " is not a positive multiple of k=" + std::to_string(k));
  detail::require(level <= spec.depth(), "level exceeds tree depth");
  DescentBlockPartition part;
  part.level = level;
  part.k = k;
  part.r = spec.r();
  part.blocks = partition_consecutive(level, spec.level_size(level), ipow(spec.r(), k));
  return part;
}

// max{j : r^j <= M}: first level at which block correction applies.
inline int first_block_level(std::uint64_t block_size, std::uint64_t r) {
  detail::require(block_size >= 1 && r >= 2, "need M >= 1 and r >= 2");
  int j = 0;
  std::uint64_t v = 1;
  while (v <= block_size / r) {
    v *= r;
    ++j;
  }
  return j;
}

inline bool is_power_of(std::uint64_t value, std::uint64_t r) noexcept {
  if (value == 0 || r < 2) return false;
  while (value % r == 0) value /= r;
  return value == 1;
}

/// Offspring counts of the renormalized random tree produced by minority
/// removal: entry [m][b] is the number of children of block b at level m.
struct RandomTreeSample {
  std::vector<std::vector<std::uint32_t>> offspring_counts;

  // Within-descent removal keeps between r^k/2 and r^k members per block.
  [[nodiscard]] bool valid_within_descent(std::uint64_t r, int k) const {
    const std::uint64_t block = ipow(r, k);
    for (const auto& level : offspring_counts) {
      for (const auto c : level) {
        if (2 * static_cast<std::uint64_t>(c) < block || c > block) return false;
      }
    }
    return true;
  }

  // Per-step removal with r >= 4 leaves every block at least two child blocks.
  [[nodiscard]] bool valid_per_step(std::uint64_t r) const {
    if (r < 4) return true;
    for (const auto& level : offspring_counts) {
      for (const auto c : level) {
        if (c < 2) return false;
      }
    }
    return true;
  }

  [[nodiscard]] double mean_offspring() const {
    double total = 0.0;
    double count = 0.0;
    for (const auto& level : offspring_counts) {
      for (const auto c : level) {
        total += c;
        count += 1.0;
      }
    }
    return count > 0 ? total / count : 0.0;
  }
};

}  // namespace treecast
