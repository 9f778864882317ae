#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "treecast/estimators.hpp"
#include "treecast/exact.hpp"
#include "treecast/fk.hpp"
#include "treecast/ml.hpp"

namespace treecast::verify {

/// One gate: what was measured against what was required.
struct Check {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  std::string required;
  std::string detail;
};

struct SuiteResult {
  std::string suite;
  std::vector<Check> checks;
  double seconds = 0.0;

  [[nodiscard]] bool passed() const {
    for (const auto& c : checks) {
      if (!c.passed) return false;
    }
    return !checks.empty();
  }
};

namespace detail {

inline std::string fmt(double x, int digits = 10) {
  std::ostringstream os;
  os.precision(digits);
  os << x;
  return os.str();
}

inline Check check(std::string name, bool passed, double measured, std::string required, std::string detail = {}) {
  return {std::move(name), passed, measured, std::move(required), std::move(detail)};
}

// Runs body and appends a runtime gate.
inline SuiteResult timed(const std::string& suite, double limit_seconds,
                         const std::function<void(std::vector<Check>&)>& body) {
  SuiteResult res;
  res.suite = suite;
  const auto t0 = std::chrono::steady_clock::now();
  body(res.checks);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  res.checks.push_back(check("runtime_seconds", res.seconds < limit_seconds, res.seconds, "< " + fmt(limit_seconds)));
  return res;
}

inline double critical_eps(std::uint64_t r) {
  const double s = std::sqrt(double(r));
  return (s - 1.0) / (2.0 * s);
}

}  // namespace detail

// |(1 - 2 eps~(k)) - (1 - 2 eps)^k| over a 99-point eps grid and k = 1..10.
inline SuiteResult fraction_identity() {
  return detail::timed("fraction_identity", 1.0, [](std::vector<Check>& out) {
    double worst = 0.0;
    for (int i = 1; i <= 99; ++i) {
      const double eps = 0.495 * i / 100.0;
      for (int k = 1; k <= 10; ++k) {
        const double lhs = 1.0 - 2.0 * fraction_error_rate(k, eps);
        worst = std::max(worst, std::abs(lhs - std::pow(1.0 - 2.0 * eps, k)));
      }
    }
    out.push_back(detail::check("max_residual", worst < 1e-12, worst, "< 1e-12"));
  });
}

// p_c(1) on the binary tree equals 1/sqrt(2).
inline SuiteResult equality_case() {
  return detail::timed("equality_case", 1.0, [](std::vector<Check>& out) {
    const auto est = critical_point_k(1, 2, 1e-9);
    const double err = std::abs(est.p_c() - 1.0 / std::sqrt(2.0));
    out.push_back(detail::check("abs(p_c(1) - 1/sqrt2)", err < 1e-8, err, "< 1e-8", "p_c=" + detail::fmt(est.p_c(), 12)));
    out.push_back(detail::check("bracket_width", est.p_hi - est.p_lo <= 1e-9, est.p_hi - est.p_lo, "<= 1e-9"));
    const double t = t_statistic(1, 2, detail::critical_eps(2));
    out.push_back(detail::check("abs(T_{1,2}) at critical eps", std::abs(t) < 1e-12, std::abs(t), "< 1e-12"));
  });
}

// p_c(k) < 1/sqrt(r) - 1e-4 and T_{k,r}(critical eps) > 1e-8 off the equality case.
inline SuiteResult strict_inequality() {
  return detail::timed("strict_inequality", 10.0, [](std::vector<Check>& out) {
    const std::pair<int, std::uint64_t> cases[] = {{1, 3}, {2, 2}, {3, 2}, {2, 3}};
    for (const auto& [k, r] : cases) {
      const std::string tag = "k=" + std::to_string(k) + ",r=" + std::to_string(r);
      const double pc = critical_point_k(k, r, 1e-9).p_c();
      const double gap = 1.0 / std::sqrt(double(r)) - pc;
      out.push_back(detail::check("1/sqrt(r) - p_c(k) [" + tag + "]", gap > 1e-4, gap, "> 1e-4",
                                  "p_c=" + detail::fmt(pc)));
      const double t = t_statistic(k, r, detail::critical_eps(r));
      out.push_back(detail::check("T at critical eps [" + tag + "]", t > 1e-8, t, "> 1e-8"));
    }
    // Positivity of T_{2,2} across the open interval.
    double worst = INFINITY;
    for (int i = 1; i < 50; ++i) worst = std::min(worst, t_statistic(2, 2, 0.5 * i / 50.0));
    out.push_back(detail::check("min T_{2,2} on eps grid", worst > 0.0, worst, "> 0"));
  });
}

// p_c(k), k = 1..9 on the binary tree: strictly decreasing, >= 1/2, and the
// excess over 1/2 shrinks by at least a factor 3.
inline SuiteResult critical_trend() {
  return detail::timed("critical_trend", 120.0, [](std::vector<Check>& out) {
    std::vector<double> pc;
    for (int k = 1; k <= 9; ++k) pc.push_back(critical_point_k(k, 2, 1e-9).p_c());
    double worst_step = INFINITY;
    for (std::size_t i = 1; i < pc.size(); ++i) worst_step = std::min(worst_step, pc[i - 1] - pc[i]);
    out.push_back(detail::check("min decrease p_c(k-1) - p_c(k)", worst_step > 0.0, worst_step, "> 0"));
    const double low = *std::min_element(pc.begin(), pc.end());
    out.push_back(detail::check("min p_c(k)", low >= 0.5, low, ">= 0.5"));
    const double ratio = (pc.front() - 0.5) / (pc.back() - 0.5);
    std::string seq;
    for (const double v : pc) seq += detail::fmt(v, 8) + " ";
    out.push_back(detail::check("(p_c(1)-1/2)/(p_c(9)-1/2)", ratio >= 3.0, ratio, ">= 3", seq));
  });
}

// |p(6)^(1/6) - p sqrt(r)| at r = 4, p = 0.3.
inline SuiteResult growth_rate() {
  return detail::timed("growth_rate", 120.0, [](std::vector<Check>& out) {
    const double p = 0.3;
    const double pk = 1.0 - 2.0 * effective_error_rate(6, 4, 0.5 * (1.0 - p));
    const double rate = std::pow(pk, 1.0 / 6.0);
    const double err = std::abs(rate - p * 2.0);
    out.push_back(detail::check("abs(p(6)^(1/6) - p sqrt r)", err <= 0.05, err, "<= 0.05",
                                "p(6)^(1/6)=" + detail::fmt(rate)));
  });
}

// Every sample has sum z^2 >= (1-p)/2 r^k at r = 4, p = 0.3, k = 10.
inline SuiteResult second_moment_floor(std::uint64_t seed = 20240601) {
  return detail::timed("second_moment_floor", 60.0, [seed](std::vector<Check>& out) {
    const auto rep = moment_bound_report(0.3, 4, {10}, 200, SeedSpec{seed, 0});
    const double low = rep.per_k.front().z2_ratio.min;
    out.push_back(detail::check("regime p^2 r < 1 < p r", rep.regime_ok, rep.regime_ok ? 1.0 : 0.0, "true"));
    out.push_back(detail::check("min sum_z2 / r^k", low >= 0.35, low, ">= 0.35"));
  });
}

// Median sum z^3 / (p r^2)^k drops from k = 6 to k = 12.
inline SuiteResult third_moment_decay(std::uint64_t seed = 20240602) {
  return detail::timed("third_moment_decay", 120.0, [seed](std::vector<Check>& out) {
    const auto rep = moment_bound_report(0.3, 4, {6, 12}, 200, SeedSpec{seed, 0});
    const double m6 = rep.per_k[0].z3_ratio.median;
    const double m12 = rep.per_k[1].z3_ratio.median;
    out.push_back(detail::check("median z3 ratio k=12 minus k=6", m12 < m6, m12 - m6, "< 0",
                                "k=6: " + detail::fmt(m6) + ", k=12: " + detail::fmt(m12)));
  });
}

// Exhaustive anti-concentration comparison, m <= 8, sizes 1..3, alpha 0..3.
inline SuiteResult anti_concentration() {
  return detail::timed("anti_concentration", 30.0, [](std::vector<Check>& out) {
    const auto rep = anti_concentration_check(8, 3, {0, 1, 2, 3});
    std::string first;
    if (!rep.examples.empty()) {
      const auto& e = rep.examples.front();
      first = "first: m=" + std::to_string(e.m) + " I=" + std::to_string(e.I) + " alpha=" + std::to_string(e.alpha) +
              " lhs=" + detail::fmt(e.lhs) + " rhs=" + detail::fmt(e.rhs);
    }
    out.push_back(detail::check("violations", rep.violations == 0, double(rep.violations), "== 0",
                                std::to_string(rep.cases) + " cases; " + first));
    // Diagnostics, not gates: where the violations sit.
    out.push_back(detail::check("violations with alpha > 0 (diagnostic)", true, double(rep.positive_alpha_violations),
                                "report", std::to_string(rep.positive_alpha_cases) + " cases"));
    out.push_back(detail::check("violations with even extra mass (diagnostic)", true,
                                double(rep.parity_matched_violations), "report",
                                std::to_string(rep.parity_matched_cases) + " cases"));
  });
}

// The four conditional advantages are strictly positive.
inline SuiteResult conditionals() {
  return detail::timed("conditionals", 30.0, [](std::vector<Check>& out) {
    double worst = INFINITY;
    std::string where;
    int tables = 0;
    const auto scan = [&](std::uint64_t r, int max_n) {
      for (const double eps : {0.1, 0.3, 0.45}) {
        for (int n = 1; n <= max_n; ++n) {
          const auto t = lemma22_conditionals(n, r, eps);
          ++tables;
          if (t.min_value() < worst) {
            worst = t.min_value();
            where = "r=" + std::to_string(r) + " n=" + std::to_string(n) + " eps=" + detail::fmt(eps);
          }
        }
      }
    };
    scan(2, 6);
    scan(3, 3);
    out.push_back(detail::check("min conditional advantage", worst > 0.0, worst, "> 0",
                                std::to_string(tables) + " tables; min at " + where));
  });
}

// ML advantage on a tree is at least that on any subtree observed at the same level.
inline SuiteResult subtree_monotonicity(std::uint64_t seed = 20240605) {
  return detail::timed("subtree_monotonicity", 60.0, [seed](std::vector<Check>& out) {
    Stream rng = SeedSpec{seed, 0}.stream(0, Purpose::TreeShape);
    int violations = 0;
    int comparisons = 0;
    double min_gap = INFINITY;
    for (int i = 0; i < 20; ++i) {
      const int height = 2 + int(rng.below(2));
      const auto tree = random_tree(rng, height, 3, 12);
      const auto obs = tree.observed().size();
      std::vector<std::size_t> keep;
      while (keep.empty()) {
        for (std::size_t j = 0; j < obs; ++j) {
          if (rng.coin()) keep.push_back(j);
        }
      }
      const auto sub = tree.spanned_by(keep);
      for (const double eps : {0.1, 0.3}) {
        const double gap = ml_delta_exact(tree, eps) - ml_delta_exact(sub, eps);
        min_gap = std::min(min_gap, gap);
        ++comparisons;
        if (gap < -1e-12) ++violations;
      }
    }
    out.push_back(detail::check("violations", violations == 0, violations, "== 0",
                                std::to_string(comparisons) + " comparisons; min gap " + detail::fmt(min_gap)));
  });
}

// Block correction beats the uncorrected chain above the Kesten-Stigum threshold.
inline SuiteResult block_correction(std::uint64_t seed = 20240611, std::uint64_t replicates = 10000) {
  return detail::timed("block_correction", 300.0, [=](std::vector<Check>& out) {
    const std::uint64_t r = 2;
    const double eps = 0.4;
    const auto scan = minimal_block_size(r, eps);
    out.push_back(detail::check("M* found (power of 2)", scan.block_size > 0 && is_power_of(scan.block_size, r),
                                double(scan.block_size), "power of 2",
                                "(1-2 eps_M*)^2 r = " + detail::fmt(scan.condition)));
    if (scan.block_size == 0) return;
    const std::uint64_t m = 2 * scan.block_size;
    const auto scheme = CorrectionScheme::block_majority(m);
    const int depth = scheme.start_level(r) + 8;
    McConfig cfg;
    cfg.r = r;
    cfg.replicates = replicates;
    cfg.depth = depth;
    cfg.scheme = scheme;
    cfg.channel = ChannelParams::from_epsilon(eps);
    cfg.seed = SeedSpec{seed, 0};
    cfg.pin = PinMode::RenormalizedRoot;
    const auto corrected = mc_delta(cfg).back();
    McConfig plain = cfg;
    plain.scheme = CorrectionScheme::identity();
    plain.pin = PinMode::TrueRoot;
    plain.seed = SeedSpec{seed + 1, 0};
    const auto identity = mc_delta(plain).back();
    const double sep = separation_sigmas(corrected, identity);
    const auto exact = exact_counterpart(scheme, r, eps, depth, PinMode::RenormalizedRoot);
    out.push_back(detail::check("delta_hat block-majority:" + std::to_string(m) + " at level " + std::to_string(depth),
                                corrected.delta_hat > 0.2, corrected.delta_hat, "> 0.2",
                                "se=" + detail::fmt(corrected.se, 4) + " exact=" + detail::fmt(exact.value_or(NAN))));
    out.push_back(detail::check("separation from identity (sigmas)", sep >= 4.0, sep, ">= 4",
                                "identity delta_hat=" + detail::fmt(identity.delta_hat, 4)));
  });
}

// Within-descent minority removal, k = 2, r = 4: bracket lower edge >= 1/r and
// a clear advantage at p = 0.45.
inline SuiteResult minority_removal(std::uint64_t seed = 20240612, std::uint64_t replicates = 10000,
                                    double floor = 0.1) {
  return detail::timed("minority_removal", 600.0, [=](std::vector<Check>& out) {
    const std::uint64_t r = 4;
    const int level = 8;
    const auto scheme = CorrectionScheme::descent_minority_removal(2);
    BracketConfig bc;
    bc.floor = floor;
    const auto bracket = mc_critical_bracket(scheme, r, level, {0.15, 0.2, 0.25, 0.28, 0.3, 0.35, 0.4, 0.5, 0.6},
                                             replicates, SeedSpec{seed, 0}, bc);
    std::string grid;
    for (const auto& g : bracket.grid) {
      grid += detail::fmt(g.p, 3) + ":" + verdict_name(g.verdict) + "(" + detail::fmt(g.estimate.delta_hat, 3) + ") ";
    }
    out.push_back(detail::check("bracket lower edge", bracket.p_lo >= 0.25, bracket.p_lo, ">= 0.25",
                                "upper edge " + detail::fmt(bracket.p_hi) + "; " + grid));
    const double pc2 = critical_point_k(2, r, 1e-9).p_c();
    out.push_back(detail::check("0.45 above majority-scheme p_c(2)", 0.45 > pc2, pc2, "< 0.45"));
    McConfig cfg;
    cfg.r = r;
    cfg.replicates = 10000;
    cfg.depth = level;
    cfg.scheme = scheme;
    cfg.channel = ChannelParams::from_p(0.45);
    cfg.seed = SeedSpec{seed + 7, 0};
    const auto est = mc_delta(cfg).back();
    const double sigmas = est.se > 0 ? est.delta_hat / est.se : INFINITY;
    out.push_back(detail::check("delta_hat at p=0.45, level 8 (sigmas from 0)", sigmas >= 4.0, sigmas, ">= 4",
                                "delta_hat=" + detail::fmt(est.delta_hat, 4)));
  });
}

struct Fixture {
  CorrectionScheme scheme;
  std::uint64_t r;
  double eps;
  int level;
  PinMode pin;
};

inline std::vector<Fixture> crossval_fixtures() {
  using S = CorrectionScheme;
  const auto T = PinMode::TrueRoot;
  const auto R = PinMode::RenormalizedRoot;
  return {
      {S::identity(), 2, 0.1, 4, T},
      {S::identity(), 3, 0.2, 3, T},
      {S::identity(), 2, 0.25, 6, T},
      {S::identity(), 4, 0.3, 3, T},
      {S::descent_majority(2), 2, 0.1, 4, T},
      {S::descent_majority(2), 2, 0.2, 6, R},
      {S::descent_majority(3), 2, 0.15, 6, T},
      {S::fraction_identification(2), 2, 0.1, 4, T},
      {S::fraction_identification(2), 3, 0.15, 4, R},
      {S::block_majority(4), 2, 0.2, 5, T},
      {S::block_majority(8), 2, 0.3, 6, R},
      {S::block_majority(9), 3, 0.25, 4, T},
  };
}

// Monte Carlo agrees with the exact chain at every fixture, and the 99%
// interval covers the exact value in at least 95 of 100 reseeded runs.
inline SuiteResult crossval(std::uint64_t seed = 20240613, std::uint64_t replicates = 20000) {
  return detail::timed("crossval", 600.0, [=](std::vector<Check>& out) {
    const auto fixtures = crossval_fixtures();
    int agree = 0;
    double worst = 0.0;
    std::string worst_at;
    for (std::size_t i = 0; i < fixtures.size(); ++i) {
      const auto& f = fixtures[i];
      McConfig cfg;
      cfg.r = f.r;
      cfg.replicates = replicates;
      cfg.depth = f.level;
      cfg.scheme = f.scheme;
      cfg.channel = ChannelParams::from_epsilon(f.eps);
      cfg.seed = SeedSpec{seed + i, 0};
      cfg.pin = f.pin;
      const auto est = mc_delta(cfg).back();
      const double exact = exact_counterpart(f.scheme, f.r, f.eps, f.level, f.pin).value();
      const double z = est.se > 0 ? std::abs(est.delta_hat - exact) / est.se : (est.delta_hat == exact ? 0.0 : INFINITY);
      if (z <= 3.0) ++agree;
      if (z >= worst) {
        worst = z;
        worst_at = f.scheme.describe() + " r=" + std::to_string(f.r) + " eps=" + detail::fmt(f.eps) + " n=" +
                   std::to_string(f.level);
      }
    }
    out.push_back(detail::check("fixtures within 3 sigma", agree == int(fixtures.size()), agree,
                                "== " + std::to_string(fixtures.size()), "worst " + detail::fmt(worst, 3) + " sigma at " + worst_at));
    const double exact = delta_exact(4, 2, 0.1);
    int covered = 0;
    for (int run = 0; run < 100; ++run) {
      McConfig cfg;
      cfg.r = 2;
      cfg.replicates = 2000;
      cfg.depth = 4;
      cfg.channel = ChannelParams::from_epsilon(0.1);
      cfg.seed = SeedSpec{mix64(seed ^ 0xca11b7a7eULL) + std::uint64_t(run), 0};
      if (mc_delta(cfg).back().ci.contains(exact)) ++covered;
    }
    out.push_back(detail::check("99% interval coverage out of 100", covered >= 95, covered, ">= 95"));
  });
}

struct SuiteEntry {
  const char* name;
  std::function<SuiteResult()> run;
};

// Suites reachable from the command line.
inline std::vector<SuiteEntry> suites() {
  return {
      {"lemma22", [] { return conditionals(); }},
      {"lemma33", [] { return fraction_identity(); }},
      {"thm32",
       [] {
         auto a = equality_case();
         auto b = strict_inequality();
         a.suite = "thm32";
         a.checks.insert(a.checks.end(), b.checks.begin(), b.checks.end());
         a.seconds += b.seconds;
         return a;
       }},
      {"thm41", [] { return critical_trend(); }},
      {"thm21", [] { return block_correction(); }},
      {"fk-moments",
       [] {
         auto a = growth_rate();
         for (auto part : {second_moment_floor(), third_moment_decay()}) {
           a.checks.insert(a.checks.end(), part.checks.begin(), part.checks.end());
           a.seconds += part.seconds;
         }
         a.suite = "fk-moments";
         return a;
       }},
      {"lemma48", [] { return anti_concentration(); }},
      {"lemma51", [] { return subtree_monotonicity(); }},
      {"thm52", [] { return minority_removal(); }},
      {"crossval", [] { return crossval(); }},
  };
}

}  // namespace treecast::verify
