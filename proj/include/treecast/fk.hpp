#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "treecast/broadcast.hpp"
#include "treecast/error.hpp"
#include "treecast/parallel.hpp"
#include "treecast/rng.hpp"
#include "treecast/signals.hpp"
#include "treecast/tree.hpp"

namespace treecast {

/// Cluster labels of one level of the FK edge configuration. Label 0 is the
/// root cluster; every other label is the cluster based at the vertex whose
/// incoming edge was closed, numbered in creation order.
struct FkLevelState {
  int level = 0;
  std::vector<std::uint32_t> labels{0};
  std::uint64_t label_count = 1;  // labels handed out so far, all levels
  std::uint64_t first_new_label = 1;  // labels from here on were born at this level
};

enum class ClusterDetail {
  Moments,  // counts and moment sums only
  Full,     // also the sorted size list
};

struct ClusterStats {
  int k = 0;
  std::uint64_t m_k = 0;           // clusters meeting level k
  std::vector<std::uint64_t> z;    // sorted sizes, Full detail only
  std::uint64_t R_k = 0;           // level-k size of the root cluster
  double sum_z2 = 0.0;
  double sum_z3 = 0.0;
  double W_k = 0.0;                // R_k / (pr)^k
  std::uint64_t level_size = 0;
};

/// One level down: each parent-child edge is open with probability p; an
/// open edge passes the parent's label on, a closed one starts a new cluster.
/// Writes into `next`, reusing its storage.
inline void fk_advance(const FkLevelState& s, FkLevelState& next, std::uint64_t r, double p, const SeedSpec& seed,
                       const Budget& budget = {}) {
  if (s.labels.size() > budget.vertices_per_level / r) {
    throw BudgetError("FK level " + std::to_string(s.level + 1) + " exceeds the vertex budget of " +
                      std::to_string(budget.vertices_per_level));
  }
  if (s.label_count + s.labels.size() * r > 0xffffffffULL) throw BudgetError("FK label space exhausted");
  next.level = s.level + 1;
  next.labels.resize(s.labels.size() * r);
  next.first_new_label = s.label_count;
  Stream rng = seed.stream(static_cast<std::uint64_t>(next.level), Purpose::FkEdge);
  auto label = static_cast<std::uint32_t>(s.label_count);
  std::uint32_t* out = next.labels.data();
  std::uint64_t open = 0;
  int left = 0;
  for (const std::uint32_t parent : s.labels) {
    for (std::uint64_t j = 0; j < r; ++j) {
      if (left == 0) {
        open = bernoulli_word(rng, p);
        left = 64;
      }
      const std::uint32_t closed = static_cast<std::uint32_t>(~open & 1U);
      *out++ = closed != 0 ? label : parent;
      label += closed;
      open >>= 1;
      --left;
    }
  }
  next.label_count = label;
}

inline FkLevelState fk_next_level(const FkLevelState& s, std::uint64_t r, double p, const SeedSpec& seed,
                                  const Budget& budget = {}) {
  FkLevelState next;
  fk_advance(s, next, r, p, seed, budget);
  return next;
}

inline ClusterStats cluster_stats(const FkLevelState& s, std::uint64_t r, double p,
                                  ClusterDetail detail = ClusterDetail::Moments) {
  ClusterStats st;
  st.k = s.level;
  st.level_size = s.labels.size();
  // A cluster born at this level is a single vertex here; only older labels
  // need counting.
  thread_local std::vector<std::uint32_t> counts;
  counts.assign(s.first_new_label, 0);
  std::uint64_t singletons = 0;
  for (const auto l : s.labels) {
    if (l >= s.first_new_label) {
      ++singletons;
    } else {
      ++counts[l];
    }
  }
  st.R_k = counts.empty() ? 0 : counts[0];
  st.m_k = singletons;
  st.sum_z2 = double(singletons);
  st.sum_z3 = double(singletons);
  if (detail == ClusterDetail::Full) st.z.assign(singletons, 1);
  for (const auto c : counts) {
    if (c == 0) continue;
    const auto z = static_cast<double>(c);
    ++st.m_k;
    st.sum_z2 += z * z;
    st.sum_z3 += z * z * z;
    if (detail == ClusterDetail::Full) st.z.push_back(c);
  }
  std::sort(st.z.begin(), st.z.end());
  st.W_k = static_cast<double>(st.R_k) / std::pow(p * static_cast<double>(r), st.k);
  return st;
}

inline FkLevelState sample_fk_level(double p, std::uint64_t r, int k, const SeedSpec& seed, const Budget& budget = {}) {
  detail::require(p >= 0.0 && p <= 1.0, "p must lie in [0, 1]");
  detail::require(r >= 2 && k >= 0, "need r >= 2 and k >= 0");
  const auto width = checked_pow(r, k);
  if (!width || *width > budget.vertices_per_level) {
    throw BudgetError("FK level " + std::to_string(k) + " exceeds the vertex budget");
  }
  FkLevelState s;
  for (int n = 0; n < k; ++n) s = fk_next_level(s, r, p, seed, budget);
  return s;
}

inline ClusterStats sample_fk_level_stats(double p, std::uint64_t r, int k, const SeedSpec& seed,
                                          ClusterDetail detail = ClusterDetail::Full, const Budget& budget = {}) {
  return cluster_stats(sample_fk_level(p, r, k, seed, budget), r, p, detail);
}

/// Stats at several levels of one sample, in a single top-down pass.
inline std::vector<ClusterStats> sample_fk_profile(double p, std::uint64_t r, std::vector<int> ks, const SeedSpec& seed,
                                                   ClusterDetail detail = ClusterDetail::Moments,
                                                   const Budget& budget = {}) {
  detail::require(p >= 0.0 && p <= 1.0, "p must lie in [0, 1]");
  detail::require(!ks.empty(), "no levels requested");
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  detail::require(ks.front() >= 0, "levels must be >= 0");
  const auto width = checked_pow(r, ks.back());
  if (!width || *width > budget.vertices_per_level) {
    throw BudgetError("FK level " + std::to_string(ks.back()) + " exceeds the vertex budget");
  }
  // Two per-thread buffers, swapped level by level, so repeated samples do
  // not pay for fresh pages.
  thread_local FkLevelState a;
  thread_local FkLevelState b;
  a = FkLevelState{};
  a.labels.assign(1, 0);
  FkLevelState* cur = &a;
  FkLevelState* nxt = &b;
  std::vector<ClusterStats> out;
  for (const int k : ks) {
    while (cur->level < k) {
      fk_advance(*cur, *nxt, r, p, seed, budget);
      std::swap(cur, nxt);
    }
    out.push_back(cluster_stats(*cur, r, p, detail));
  }
  return out;
}

/// Signals from an FK state: the root cluster carries sigma_0, every other
/// cluster an independent fair sign.
inline GenerationSignals spin_assignment_from_fk(const FkLevelState& s, bool root_plus, const SeedSpec& seed) {
  Stream rng = seed.stream(static_cast<std::uint64_t>(s.level), Purpose::FkSpin);
  std::vector<std::uint64_t> signs((s.label_count + 63) / 64);
  for (auto& w : signs) w = rng();
  GenerationSignals g(s.level, s.labels.size(), false);
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    const auto l = s.labels[i];
    const bool plus = l == 0 ? root_plus : ((signs[l >> 6] >> (l & 63)) & 1U) != 0;
    if (plus) g.set(i, true);
  }
  return g;
}

// p^2 r < 1 < p r.
inline bool moment_regime(double p, std::uint64_t r) {
  const double rd = static_cast<double>(r);
  return p * p * rd < 1.0 && p * rd > 1.0;
}

struct Quantiles {
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;
  double q10 = 0.0;
  double q90 = 0.0;
};

inline Quantiles quantiles(std::vector<double> xs) {
  detail::require(!xs.empty(), "no samples");
  std::sort(xs.begin(), xs.end());
  const auto at = [&xs](double q) {
    const double pos = q * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
  };
  return {xs.front(), at(0.5), xs.back(), at(0.1), at(0.9)};
}

struct MomentSummary {
  int k = 0;
  Quantiles z2_ratio;  // sum_z2 / r^k
  Quantiles z3_ratio;  // sum_z3 / (p r^2)^k
  Quantiles m_k;
  double mean_W = 0.0;
  double se_W = 0.0;
};

struct MomentReport {
  double p = 0.0;
  std::uint64_t r = 2;
  bool regime_ok = false;
  std::uint64_t samples = 0;
  std::vector<MomentSummary> per_k;
};

/// Per-level summaries of the cluster moments over independent samples.
/// With enforce_regime the call fails outside p^2 r < 1 < p r.
inline MomentReport moment_bound_report(double p, std::uint64_t r, const std::vector<int>& ks, std::uint64_t samples,
                                        const SeedSpec& seed, bool enforce_regime = true, const Budget& budget = {}) {
  detail::require(samples >= 1, "need at least one sample");
  MomentReport rep;
  rep.p = p;
  rep.r = r;
  rep.samples = samples;
  rep.regime_ok = moment_regime(p, r);
  if (enforce_regime && !rep.regime_ok) {
    throw DomainError("moment checks need p^2 r < 1 < p r; got p^2 r = " + std::to_string(p * p * double(r)) +
                      ", p r = " + std::to_string(p * double(r)));
  }
  const auto profiles = parallel_map(samples, [&](std::uint64_t i) {
    return sample_fk_profile(p, r, ks, seed.for_replicate(i), ClusterDetail::Moments, budget);
  });
  const std::size_t levels = profiles.front().size();
  for (std::size_t j = 0; j < levels; ++j) {
    const int k = profiles.front()[j].k;
    const double rk = std::pow(double(r), k);
    const double pr2k = std::pow(p * double(r) * double(r), k);
    std::vector<double> z2;
    std::vector<double> z3;
    std::vector<double> mk;
    double w_sum = 0.0;
    double w_sq = 0.0;
    for (const auto& prof : profiles) {
      const auto& st = prof[j];
      z2.push_back(st.sum_z2 / rk);
      z3.push_back(st.sum_z3 / pr2k);
      mk.push_back(double(st.m_k));
      w_sum += st.W_k;
      w_sq += st.W_k * st.W_k;
    }
    MomentSummary sum;
    sum.k = k;
    sum.z2_ratio = quantiles(z2);
    sum.z3_ratio = quantiles(z3);
    sum.m_k = quantiles(mk);
    const double n = double(samples);
    sum.mean_W = w_sum / n;
    sum.se_W = n > 1 ? std::sqrt(std::max(0.0, (w_sq - n * sum.mean_W * sum.mean_W) / (n - 1)) / n) : 0.0;
    rep.per_k.push_back(std::move(sum));
  }
  return rep;
}

struct TailProbe {
  int k = 0;
  double threshold = 0.0;  // factor^k (p r)^k
  std::uint64_t hits = 0;
  std::uint64_t samples = 0;
  bool near_critical = false;  // p r < 1.05: slow decay expected

  [[nodiscard]] double frequency() const { return samples ? double(hits) / double(samples) : 0.0; }
};

/// Frequency of R_k >= factor^k (p r)^k. R_k is sampled as the
/// Galton-Watson chain R_{n+1} ~ Bin(r R_n, p), which is the root-cluster
/// marginal of the FK configuration.
inline TailProbe tail_probe_Rk(double p, std::uint64_t r, int k, double threshold_factor, std::uint64_t samples,
                               const SeedSpec& seed) {
  detail::require(p >= 0.0 && p <= 1.0, "p must lie in [0, 1]");
  detail::require(k >= 0 && samples >= 1 && threshold_factor > 0.0, "bad tail probe parameters");
  if (!(p * double(r) > 1.0)) throw DomainError("tail probe needs p r > 1, got " + std::to_string(p * double(r)));
  TailProbe t;
  t.k = k;
  t.samples = samples;
  t.threshold = std::pow(threshold_factor * p * double(r), k);
  t.near_critical = p * double(r) < 1.05;
  const auto hits = parallel_map(samples, [&](std::uint64_t i) -> int {
    Stream rng = seed.for_replicate(i).stream(0, Purpose::TreeShape);
    std::uint64_t size = 1;
    for (int n = 0; n < k && size > 0; ++n) {
      std::binomial_distribution<std::uint64_t> step(size * r, p);
      size = step(rng);
    }
    return double(size) >= t.threshold ? 1 : 0;
  });
  for (const int h : hits) t.hits += std::uint64_t(h);
  return t;
}

struct AntiConcentrationCase {
  int m = 0;
  int I = 0;
  std::vector<int> extra_sizes;  // sizes of variables I+1..m
  int alpha = 0;
  double lhs = 0.0;  // P(|S_m| <= alpha)
  double rhs = 0.0;  // P(|S_I| <= alpha)
};

struct AntiConcentrationReport {
  std::uint64_t cases = 0;
  std::uint64_t violations = 0;
  std::uint64_t positive_alpha_cases = 0;
  std::uint64_t positive_alpha_violations = 0;
  std::uint64_t parity_matched_cases = 0;  // extra sizes sum to an even number
  std::uint64_t parity_matched_violations = 0;
  std::vector<AntiConcentrationCase> examples;  // first few violations
};

/// Exhaustive check of P(|Z_1 + ... + Z_m| <= alpha) <= P(|Z_1 + ... + Z_I| <= alpha)
/// for independent fair signs Z_i in {-l_i, l_i}, l_i = 1 for i <= I, over
/// every 1 <= I <= m <= max_m, every extra size tuple in {1..max_size}^(m-I)
/// and every alpha. Probabilities are exact counts over the 2^m sign patterns.
inline AntiConcentrationReport anti_concentration_check(int max_m, int max_size, const std::vector<int>& alphas,
                                                        std::size_t keep_examples = 5) {
  detail::require(max_m >= 1 && max_m <= 10, "max_m must lie in [1, 10] for exhaustive enumeration");
  detail::require(max_size >= 1, "max_size must be >= 1");
  AntiConcentrationReport rep;
  // Distribution of a sum of fair signed sizes as counts, offset by the max |sum|.
  const auto sum_counts = [](const std::vector<int>& sizes) {
    int span = 0;
    std::vector<std::uint64_t> c{1};
    for (const int l : sizes) {
      std::vector<std::uint64_t> n(c.size() + 2 * std::size_t(l), 0);
      for (std::size_t j = 0; j < c.size(); ++j) {
        n[j] += c[j];
        n[j + 2 * std::size_t(l)] += c[j];
      }
      c = std::move(n);
      span += l;
    }
    return std::pair{c, span};
  };
  const auto mass_within = [](const std::pair<std::vector<std::uint64_t>, int>& d, int alpha) {
    std::uint64_t hit = 0;
    std::uint64_t total = 0;
    for (std::size_t j = 0; j < d.first.size(); ++j) {
      total += d.first[j];
      if (std::abs(int(j) - d.second) <= alpha) hit += d.first[j];
    }
    return double(hit) / double(total);
  };
  for (int m = 1; m <= max_m; ++m) {
    for (int I = 1; I <= m; ++I) {
      const int extra = m - I;
      const auto base = sum_counts(std::vector<int>(std::size_t(I), 1));
      std::vector<int> sizes(std::size_t(extra), 1);
      for (;;) {
        std::vector<int> all(std::size_t(I), 1);
        all.insert(all.end(), sizes.begin(), sizes.end());
        const auto full = sum_counts(all);
        int extra_sum = 0;
        for (const int l : sizes) extra_sum += l;
        const bool parity = extra_sum % 2 == 0;
        for (const int alpha : alphas) {
          const double lhs = mass_within(full, alpha);
          const double rhs = mass_within(base, alpha);
          const bool bad = lhs > rhs + 1e-15;
          ++rep.cases;
          rep.violations += bad;
          if (alpha > 0) {
            ++rep.positive_alpha_cases;
            rep.positive_alpha_violations += bad;
          }
          if (parity) {
            ++rep.parity_matched_cases;
            rep.parity_matched_violations += bad;
          }
          if (bad && rep.examples.size() < keep_examples) rep.examples.push_back({m, I, sizes, alpha, lhs, rhs});
        }
        // Next size tuple, odometer style.
        std::size_t pos = 0;
        while (pos < sizes.size() && sizes[pos] == max_size) sizes[pos++] = 1;
        if (pos == sizes.size()) break;
        ++sizes[pos];
      }
    }
  }
  return rep;
}

}  // namespace treecast
