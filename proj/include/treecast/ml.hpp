#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "treecast/error.hpp"
#include "treecast/rng.hpp"

namespace treecast {

/// A small rooted tree given by parent pointers, vertex 0 the root and
/// parent[v] < v. The observed set is every vertex at the maximal depth.
class ExplicitTree {
 public:
  ExplicitTree() : parent_{-1}, depth_{0} {}

  static ExplicitTree from_parents(std::vector<int> parent) {
    detail::require(!parent.empty() && parent[0] == -1, "vertex 0 must be the root (parent -1)");
    ExplicitTree t;
    t.parent_ = std::move(parent);
    t.depth_.assign(t.parent_.size(), 0);
    for (std::size_t v = 1; v < t.parent_.size(); ++v) {
      const int p = t.parent_[v];
      detail::require(p >= 0 && static_cast<std::size_t>(p) < v, "parent[v] must lie in [0, v)");
      t.depth_[v] = t.depth_[static_cast<std::size_t>(p)] + 1;
    }
    return t;
  }

  static ExplicitTree regular(int r, int depth) {
    detail::require(r >= 1 && depth >= 0, "need r >= 1 and depth >= 0");
    std::vector<int> parent{-1};
    int first = 0;
    int count = 1;
    for (int n = 0; n < depth; ++n) {
      for (int s = 0; s < count; ++s) {
        for (int j = 0; j < r; ++j) parent.push_back(first + s);
      }
      first += count;
      count *= r;
    }
    return from_parents(std::move(parent));
  }

  [[nodiscard]] std::size_t size() const noexcept { return parent_.size(); }
  [[nodiscard]] int parent(std::size_t v) const noexcept { return parent_[v]; }
  [[nodiscard]] int depth(std::size_t v) const noexcept { return depth_[v]; }
  [[nodiscard]] const std::vector<int>& parents() const noexcept { return parent_; }

  [[nodiscard]] int height() const noexcept { return *std::max_element(depth_.begin(), depth_.end()); }

  [[nodiscard]] std::vector<std::size_t> observed() const {
    std::vector<std::size_t> out;
    const int h = height();
    for (std::size_t v = 0; v < size(); ++v) {
      if (depth_[v] == h) out.push_back(v);
    }
    return out;
  }

  /// The subtree spanned by the root and the observed vertices in `keep`
  /// (indices into observed()). Keeps the height, so T' is observed at the
  /// same level as T.
  [[nodiscard]] ExplicitTree spanned_by(const std::vector<std::size_t>& keep) const {
    detail::require(!keep.empty(), "subtree needs at least one observed vertex");
    const auto obs = observed();
    std::vector<char> in(size(), 0);
    in[0] = 1;
    for (const auto i : keep) {
      detail::require(i < obs.size(), "observed index out of range");
      for (int v = static_cast<int>(obs[i]); v >= 0 && !in[static_cast<std::size_t>(v)]; v = parent_[static_cast<std::size_t>(v)]) {
        in[static_cast<std::size_t>(v)] = 1;
      }
    }
    std::vector<int> remap(size(), -1);
    std::vector<int> parent;
    for (std::size_t v = 0; v < size(); ++v) {
      if (!in[v]) continue;
      remap[v] = static_cast<int>(parent.size());
      parent.push_back(v == 0 ? -1 : remap[static_cast<std::size_t>(parent_[v])]);
    }
    return from_parents(std::move(parent));
  }

 private:
  std::vector<int> parent_;
  std::vector<int> depth_;
};

/// Random tree of the given height: every vertex above the last level gets
/// between 1 and max_children children, resampled until the observed level
/// has between 1 and max_observed vertices.
inline ExplicitTree random_tree(Stream& rng, int height, int max_children, std::size_t max_observed) {
  detail::require(height >= 1 && max_children >= 1 && max_observed >= 1, "bad random tree parameters");
  for (;;) {
    std::vector<int> parent{-1};
    std::vector<int> level{0};
    for (int n = 0; n < height && !level.empty(); ++n) {
      std::vector<int> next;
      for (const int v : level) {
        const auto kids = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_children)));
        for (int j = 0; j < kids; ++j) {
          next.push_back(static_cast<int>(parent.size()));
          parent.push_back(v);
        }
      }
      level = std::move(next);
    }
    if (level.size() <= max_observed) return ExplicitTree::from_parents(std::move(parent));
  }
}

struct TreeDeltas {
  double ml = 0.0;        // total-variation distance of the observed laws
  double majority = 0.0;  // sign of the observed sum, ties net zero
  std::size_t observed = 0;
};

/// Exact Delta under the maximum-likelihood and majority rules on the
/// observed level, by enumerating its 2^L configurations and computing each
/// likelihood pair with a leaf-to-root recursion.
inline TreeDeltas tree_deltas_exact(const ExplicitTree& tree, double eps) {
  detail::require(eps >= 0.0 && eps <= 0.5, "epsilon must lie in [0, 1/2]");
  const auto obs = tree.observed();
  detail::require(obs.size() <= 24, "observed level has " + std::to_string(obs.size()) +
                                        " vertices; exhaustive enumeration is limited to 24");
  const std::size_t nv = tree.size();
  std::vector<int> obs_slot(nv, -1);
  for (std::size_t i = 0; i < obs.size(); ++i) obs_slot[obs[i]] = static_cast<int>(i);

  TreeDeltas out;
  out.observed = obs.size();
  std::vector<double> lp(nv);
  std::vector<double> lm(nv);
  const std::uint64_t configs = std::uint64_t{1} << obs.size();
  for (std::uint64_t c = 0; c < configs; ++c) {
    // lp[v], lm[v]: likelihood of the observations below v given sigma_v = +1 / -1.
    for (std::size_t v = 0; v < nv; ++v) {
      if (obs_slot[v] >= 0) {
        const bool plus = ((c >> obs_slot[v]) & 1U) != 0;
        lp[v] = plus ? 1.0 : 0.0;
        lm[v] = plus ? 0.0 : 1.0;
      } else {
        lp[v] = 1.0;
        lm[v] = 1.0;
      }
    }
    for (std::size_t v = nv - 1; v >= 1; --v) {
      const auto p = static_cast<std::size_t>(tree.parent(v));
      lp[p] *= (1.0 - eps) * lp[v] + eps * lm[v];
      lm[p] *= eps * lp[v] + (1.0 - eps) * lm[v];
    }
    out.ml += 0.5 * std::abs(lp[0] - lm[0]);
    const int plus = std::popcount(c);
    const int sum = 2 * plus - static_cast<int>(obs.size());
    out.majority += (sum > 0) ? lp[0] : (sum < 0 ? -lp[0] : 0.0);
  }
  return out;
}

inline double ml_delta_exact(const ExplicitTree& tree, double eps) { return tree_deltas_exact(tree, eps).ml; }

}  // namespace treecast
