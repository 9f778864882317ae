#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "treecast/broadcast.hpp"
#include "treecast/correction.hpp"
#include "treecast/error.hpp"
#include "treecast/exact.hpp"
#include "treecast/parallel.hpp"
#include "treecast/rng.hpp"

namespace treecast {

/// Two-sided standard normal quantile z with P(|Z| <= z) = level.
inline double normal_quantile(double level) {
  detail::require(level > 0.0 && level < 1.0, "confidence level must lie in (0, 1)");
  double lo = 0.0;
  double hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (std::erfc(mid / std::sqrt(2.0)) > 1.0 - level) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  [[nodiscard]] bool contains(double x) const noexcept { return x >= lo && x <= hi; }
};

inline Interval wilson_interval(std::uint64_t hits, std::uint64_t n, double z) {
  if (n == 0) return {0.0, 1.0};
  const double nn = double(n);
  const double f = double(hits) / nn;
  const double z2 = z * z;
  const double centre = (f + z2 / (2 * nn)) / (1 + z2 / nn);
  const double half = z / (1 + z2 / nn) * std::sqrt(f * (1 - f) / nn + z2 / (4 * nn * nn));
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

enum class PinMode {
  TrueRoot,          // sigma_0 = +1
  RenormalizedRoot,  // the first corrected level (or the root) forced to +1
};

struct McConfig {
  std::uint64_t r = 2;
  std::uint64_t replicates = 1000;
  int depth = 1;
  CorrectionScheme scheme;
  ChannelParams channel;
  SeedSpec seed;
  double ci_level = 0.99;
  PinMode pin = PinMode::TrueRoot;
  Budget budget{};
  unsigned workers = 0;  // 0: default_workers()

  void validate() const {
    detail::require(r >= 2, "branching rate r must be >= 2");
    detail::require(replicates >= 100, "need at least 100 replicates");
    detail::require(depth >= 0, "depth must be >= 0");
    if (scheme.within_descent()) {
      detail::require(depth % scheme.period == 0, "depth must be a multiple of the correction period k");
    }
    detail::require(ci_level > 0.0 && ci_level < 1.0, "ci level must lie in (0, 1)");
  }
};

struct DeltaEstimate {
  int n = 0;
  double delta_hat = 0.0;
  double se = 0.0;
  Interval ci;
  std::uint64_t replicates = 0;
  std::uint64_t plus = 0;   // replicates with S_n > 0
  std::uint64_t minus = 0;  // replicates with S_n < 0
};

inline DeltaEstimate make_delta_estimate(int n, std::uint64_t plus, std::uint64_t minus, std::uint64_t reps, double z) {
  DeltaEstimate e;
  e.n = n;
  e.replicates = reps;
  e.plus = plus;
  e.minus = minus;
  const double fp = double(plus) / double(reps);
  const double fm = double(minus) / double(reps);
  e.delta_hat = fp - fm;
  e.se = std::sqrt(std::max(0.0, fp + fm - e.delta_hat * e.delta_hat) / double(reps));
  const auto ip = wilson_interval(plus, reps, z);
  const auto im = wilson_interval(minus, reps, z);
  e.ci = {std::max(-1.0, ip.lo - im.hi), std::min(1.0, ip.hi - im.lo)};
  return e;
}

// (a - b) / sqrt(se_a^2 + se_b^2); infinite when both are exact.
inline double separation_sigmas(const DeltaEstimate& a, const DeltaEstimate& b) {
  const double s = std::sqrt(a.se * a.se + b.se * b.se);
  const double d = a.delta_hat - b.delta_hat;
  if (s == 0.0) return d > 0 ? INFINITY : (d < 0 ? -INFINITY : 0.0);
  return d / s;
}

/// Delta-hat at every level 0..depth. Each replicate records sign(S_n) per
/// level; replicates run in parallel and are aggregated in index order.
inline std::vector<DeltaEstimate> mc_delta(const McConfig& cfg) {
  cfg.validate();
  TrajectoryOptions opt;
  opt.root = RootMode::PinnedPlus;
  opt.pin_renormalized_root = cfg.pin == PinMode::RenormalizedRoot;
  opt.budget = cfg.budget;
  const auto levels = std::size_t(cfg.depth) + 1;
  const auto signs = parallel_map(
      cfg.replicates,
      [&](std::uint64_t rep) {
        std::vector<std::int8_t> s(levels, 0);
        simulate_trajectory(cfg.r, cfg.scheme, cfg.channel, cfg.depth, cfg.seed.for_replicate(rep), opt,
                            [&s](const CorrectedGeneration& cg) {
                              const auto v = majority_statistic(cg);
                              s[std::size_t(cg.level())] = std::int8_t((v > 0) - (v < 0));
                            });
        return s;
      },
      cfg.workers == 0 ? default_workers() : cfg.workers);
  const double z = normal_quantile(cfg.ci_level);
  std::vector<DeltaEstimate> out;
  for (std::size_t n = 0; n < levels; ++n) {
    std::uint64_t plus = 0;
    std::uint64_t minus = 0;
    for (const auto& s : signs) {
      plus += s[n] > 0;
      minus += s[n] < 0;
    }
    out.push_back(make_delta_estimate(int(n), plus, minus, cfg.replicates, z));
  }
  return out;
}

/// Exact Delta at `level` for schemes whose renormalized process is a plain
/// count chain; nullopt where no exact chain exists.
inline std::optional<double> exact_counterpart(const CorrectionScheme& scheme, std::uint64_t r, double eps, int level,
                                               PinMode pin = PinMode::TrueRoot, const Budget& budget = {}) {
  const bool renorm = pin == PinMode::RenormalizedRoot;
  switch (scheme.kind) {
    case SchemeKind::Identity: return delta_exact(level, r, eps, budget);
    case SchemeKind::WithinDescentMajority:
    case SchemeKind::FractionIdentification: {
      const int k = scheme.period;
      if (level < k) {
        if (renorm) return std::nullopt;
        return delta_exact(level, r, eps, budget);
      }
      if (level % k != 0) return std::nullopt;
      const double ek = scheme.kind == SchemeKind::WithinDescentMajority ? effective_error_rate(k, r, eps, budget)
                                                                         : fraction_error_rate(k, eps);
      const double d = delta_exact(level / k - 1, ipow(r, k), ek, budget);
      return renorm ? d : (1.0 - 2.0 * ek) * d;
    }
    case SchemeKind::BlockMajorityEveryStep: {
      if (!is_power_of(scheme.block_size, r)) return std::nullopt;
      const int j = first_block_level(scheme.block_size, r);
      if (level < j) {
        if (renorm) return std::nullopt;
        return delta_exact(level, r, eps, budget);
      }
      const double d = delta_exact(level - j, r, block_error_rate(scheme.block_size, eps), budget);
      return renorm ? d : (1.0 - 2.0 * effective_error_rate(j, r, eps, budget)) * d;
    }
    case SchemeKind::MinorityRemovalEveryStep:
    case SchemeKind::WithinDescentMinorityRemoval: return std::nullopt;
  }
  return std::nullopt;
}

struct ErrorEstimate {
  double eps_hat = 0.0;
  double se = 0.0;
  Interval ci;
  std::uint64_t replicates = 0;
};

/// Frequency estimate of the error rate of one correction period with the
/// ancestor at +1: the descent of depth k for the within-descent schemes, a
/// block of M independent channel outputs for the every-step schemes.
inline ErrorEstimate mc_effective_error(const CorrectionScheme& scheme, std::uint64_t r, double eps,
                                        std::uint64_t replicates, const SeedSpec& seed, double ci_level = 0.99) {
  detail::require(replicates >= 1, "need at least one replicate");
  detail::require(scheme.kind != SchemeKind::Identity, "identity has no correction period");
  const auto ch = ChannelParams::from_epsilon(eps);
  const auto errors = parallel_map(replicates, [&](std::uint64_t rep) -> int {
    const SeedSpec s = seed.for_replicate(rep);
    CorrectedGeneration cg;
    if (scheme.within_descent()) {
      GenerationSignals g(0, 1, true);
      for (int n = 0; n < scheme.period; ++n) g = sample_next_generation(g, r, ch, s);
      cg = apply_scheme(scheme, r, std::move(g), s);
    } else {
      GenerationSignals g(1, scheme.block_size, true);
      Stream rng = s.stream(1, Purpose::Channel);
      for (auto& w : g.words()) w ^= bernoulli_word(rng, eps);
      g.clear_tail();
      const auto part = partition_consecutive(1, scheme.block_size, scheme.block_size);
      cg = scheme.removes_minority() ? apply_minority_removal(g, part, s) : apply_block_majority(g, part, s);
    }
    return majority_statistic(cg) < 0 ? 1 : 0;
  });
  std::uint64_t bad = 0;
  for (const int e : errors) bad += std::uint64_t(e);
  ErrorEstimate est;
  est.replicates = replicates;
  est.eps_hat = double(bad) / double(replicates);
  est.se = std::sqrt(est.eps_hat * (1 - est.eps_hat) / double(replicates));
  est.ci = wilson_interval(bad, replicates, normal_quantile(ci_level));
  return est;
}

enum class Verdict { Reconstructing, NonReconstructing, Undecided };

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Reconstructing: return "reconstructing";
    case Verdict::NonReconstructing: return "non-reconstructing";
    case Verdict::Undecided: return "undecided";
  }
  return "?";
}

struct GridJudgement {
  double p = 0.0;
  DeltaEstimate estimate;
  Verdict verdict = Verdict::Undecided;
};

struct McBracket {
  double p_lo = 0.0;  // largest non-reconstructing p below p_hi (0 if none)
  double p_hi = 1.0;  // smallest reconstructing p (1 if none)
  int level = 0;
  double floor = 0.0;
  double sigmas = 4.0;
  std::vector<GridJudgement> grid;
};

struct BracketConfig {
  double floor = 0.1;   // Delta-hat threshold
  double sigmas = 4.0;  // required separation from the floor
  PinMode pin = PinMode::TrueRoot;
  Budget budget{};
  unsigned workers = 0;
};

/// Judges each grid p by Delta-hat at `level` against the floor with the
/// required separation; undecided points only widen the bracket.
inline McBracket mc_critical_bracket(const CorrectionScheme& scheme, std::uint64_t r, int level,
                                     std::vector<double> p_grid, std::uint64_t replicates, const SeedSpec& seed,
                                     const BracketConfig& bc = {}) {
  detail::require(p_grid.size() >= 5, "the p grid needs at least 5 points");
  std::sort(p_grid.begin(), p_grid.end());
  McBracket out;
  out.level = level;
  out.floor = bc.floor;
  out.sigmas = bc.sigmas;
  for (std::size_t i = 0; i < p_grid.size(); ++i) {
    McConfig cfg;
    cfg.r = r;
    cfg.replicates = replicates;
    cfg.depth = level;
    cfg.scheme = scheme;
    cfg.channel = ChannelParams::from_p(p_grid[i]);
    cfg.seed = SeedSpec{mix64(seed.master_seed ^ (0x5bd1e995ULL * (i + 1))), 0};
    cfg.pin = bc.pin;
    cfg.budget = bc.budget;
    cfg.workers = bc.workers;
    const auto est = mc_delta(cfg).back();
    GridJudgement j{p_grid[i], est, Verdict::Undecided};
    if (est.delta_hat - bc.sigmas * est.se > bc.floor) j.verdict = Verdict::Reconstructing;
    if (est.delta_hat + bc.sigmas * est.se < bc.floor) j.verdict = Verdict::NonReconstructing;
    out.grid.push_back(j);
  }
  const bool any = std::any_of(out.grid.begin(), out.grid.end(),
                               [](const GridJudgement& g) { return g.verdict != Verdict::Undecided; });
  if (!any) throw Error("every grid point is undecided at level " + std::to_string(level));
  for (const auto& g : out.grid) {
    if (g.verdict == Verdict::Reconstructing) {
      out.p_hi = g.p;
      break;
    }
  }
  for (const auto& g : out.grid) {
    if (g.verdict == Verdict::NonReconstructing && g.p < out.p_hi) out.p_lo = std::max(out.p_lo, g.p);
  }
  return out;
}

}  // namespace treecast
