#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "treecast/error.hpp"
#include "treecast/tree.hpp"

namespace treecast {

namespace detail {

inline void check_epsilon(double eps) {
  require(std::isfinite(eps) && eps >= 0.0 && eps <= 0.5, "epsilon must lie in [0, 1/2], got " + std::to_string(eps));
}

// Support size r^n + 1, checked against the budget before anything is allocated.
inline std::uint64_t level_support(std::uint64_t r, int n, const Budget& budget, const std::string& what) {
  require(r >= 1, "branching rate must be >= 1");
  require(n >= 0, "level must be >= 0");
  const auto size = checked_pow(r, n);
  if (!size || *size >= budget.support) {
    throw BudgetError(what + ": r^n = " + std::to_string(r) + "^" + std::to_string(n) +
                      " exceeds the support budget of " + std::to_string(budget.support) + " points");
  }
  return *size;
}

}  // namespace detail

/// Bin(n, q) pmf. Evaluated at the mode through lgamma and extended outward
/// by the ratio recurrence, so large n costs O(n) multiplications.
inline std::vector<double> binomial_pmf(std::uint64_t n, double q) {
  detail::require(q >= 0.0 && q <= 1.0, "binomial parameter must lie in [0, 1]");
  std::vector<double> pmf(n + 1, 0.0);
  if (q == 0.0 || q == 1.0) {
    pmf[q == 0.0 ? 0 : n] = 1.0;
    return pmf;
  }
  const auto dn = static_cast<double>(n);
  const auto mode = std::min<std::uint64_t>(n, static_cast<std::uint64_t>((dn + 1.0) * q));
  const auto dm = static_cast<double>(mode);
  pmf[mode] = std::exp(std::lgamma(dn + 1.0) - std::lgamma(dm + 1.0) - std::lgamma(dn - dm + 1.0) +
                       dm * std::log(q) + (dn - dm) * std::log1p(-q));
  const double odds = q / (1.0 - q);
  for (std::uint64_t j = mode; j < n && pmf[j] > 0.0; ++j) {
    pmf[j + 1] = pmf[j] * (static_cast<double>(n - j) / static_cast<double>(j + 1)) * odds;
  }
  for (std::uint64_t j = mode; j > 0 && pmf[j] > 0.0; --j) {
    pmf[j - 1] = pmf[j] * (static_cast<double>(j) / static_cast<double>(n - j + 1)) / odds;
  }
  return pmf;
}

/// Law of X_level, the number of +1 vertices at `level` given sigma_0 = +1.
/// Probabilities are stored as logs; -inf marks mass below double range.
struct CountDistribution {
  int level = 0;
  std::uint64_t size = 1;  // N = r^level
  std::vector<double> log_probs{0.0, 0.0};

  static CountDistribution from_probs(int level, std::vector<double> probs) {
    detail::require(!probs.empty(), "empty distribution");
    CountDistribution d;
    d.level = level;
    d.size = probs.size() - 1;
    d.log_probs.resize(probs.size());
    std::transform(probs.begin(), probs.end(), d.log_probs.begin(),
                   [](double x) { return x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity(); });
    return d;
  }

  static CountDistribution point_mass(int level, std::uint64_t size, std::uint64_t at) {
    detail::require(at <= size, "point mass outside support");
    std::vector<double> probs(size + 1, 0.0);
    probs[at] = 1.0;
    return from_probs(level, std::move(probs));
  }

  // X_0 = 1: the root carries +1.
  static CountDistribution root() { return point_mass(0, 1, 1); }

  [[nodiscard]] double prob(std::uint64_t j) const { return j <= size ? std::exp(log_probs[j]) : 0.0; }

  [[nodiscard]] std::vector<double> probs() const {
    std::vector<double> out(log_probs.size());
    std::transform(log_probs.begin(), log_probs.end(), out.begin(), [](double x) { return std::exp(x); });
    return out;
  }

  [[nodiscard]] double total() const {
    double t = 0.0;
    for (const double x : log_probs) t += std::exp(x);
    return t;
  }

  // P(X > N/2), P(X = N/2), P(X < N/2).
  struct Split {
    double above = 0.0;
    double tie = 0.0;
    double below = 0.0;
  };
  [[nodiscard]] Split split() const {
    Split s;
    for (std::uint64_t j = 0; j <= size; ++j) {
      const double p = std::exp(log_probs[j]);
      if (2 * j > size) {
        s.above += p;
      } else if (2 * j == size) {
        s.tie += p;
      } else {
        s.below += p;
      }
    }
    return s;
  }
};

namespace detail {

// One count-chain step on a linear pmf over {0..N}.
//
// Sum_m A(m) U^m V^(N-m) with U = Bin(r, 1-eps), V = Bin(r, eps), evaluated
// Horner-style: H_0 = A(N), H_i = H_{i-1} * U + A(N-i) V^i, where V^i is the
// Bin(ri, eps) pmf. All terms are nonnegative, so linear accumulation loses
// nothing to cancellation.
inline std::vector<double> chain_step(const std::vector<double>& pmf, std::uint64_t r, double eps) {
  const std::uint64_t n = pmf.size() - 1;
  const std::uint64_t next = r * n;
  const auto u = binomial_pmf(r, 1.0 - eps);
  std::vector<double> h(next + 1, 0.0);
  std::vector<double> tmp(next + 1, 0.0);
  h[0] = pmf[n];
  std::uint64_t deg = 0;
  for (std::uint64_t i = 1; i <= n; ++i) {
    const std::uint64_t nd = deg + r;
    std::fill(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(nd + 1), 0.0);
    for (std::uint64_t a = 0; a <= deg; ++a) {
      const double ha = h[a];
      if (ha == 0.0) continue;
      for (std::uint64_t b = 0; b <= r; ++b) tmp[a + b] += ha * u[b];
    }
    if (const double w = pmf[n - i]; w > 0.0) {
      const auto v = binomial_pmf(r * i, eps);
      for (std::uint64_t j = 0; j <= nd; ++j) tmp[j] += w * v[j];
    }
    std::swap(h, tmp);
    deg = nd;
  }
  return h;
}

inline std::vector<double> count_pmf(int n, std::uint64_t r, double eps, const Budget& budget) {
  level_support(r, n, budget, "count chain");
  std::vector<double> pmf{0.0, 1.0};
  for (int i = 0; i < n; ++i) pmf = chain_step(pmf, r, eps);
  return pmf;
}

// P(X > N/2) - P(X < N/2) for a pmf over {0..N}.
inline double signed_majority(const std::vector<double>& pmf) {
  const std::uint64_t n = pmf.size() - 1;
  double above = 0.0;
  double below = 0.0;
  for (std::uint64_t j = 0; j <= n; ++j) {
    if (2 * j > n) above += pmf[j];
    if (2 * j < n) below += pmf[j];
  }
  return above - below;
}

}  // namespace detail

/// X_{n+1} given the law of X_n: m plus-parents yield Bin(rm, 1-eps) plus
/// children from them and Bin(r(N-m), eps) from the rest.
inline CountDistribution count_chain_step(const CountDistribution& d, std::uint64_t r, double eps,
                                          const Budget& budget = {}) {
  detail::check_epsilon(eps);
  detail::require(r >= 1, "branching rate must be >= 1");
  detail::require(d.log_probs.size() == d.size + 1, "malformed count distribution");
  if (d.size > (budget.support - 1) / r) {
    throw BudgetError("level " + std::to_string(d.level + 1) + " count chain needs " + std::to_string(r * d.size + 1) +
                      " support points; budget is " + std::to_string(budget.support));
  }
  auto next = CountDistribution::from_probs(d.level + 1, detail::chain_step(d.probs(), r, eps));
  return next;
}

inline CountDistribution count_distribution(int n, std::uint64_t r, double eps, const Budget& budget = {}) {
  detail::check_epsilon(eps);
  return CountDistribution::from_probs(n, detail::count_pmf(n, r, eps, budget));
}

/// eps(k) = P(X_k < r^k/2) + P(X_k = r^k/2)/2.
inline double effective_error_rate(int k, std::uint64_t r, double eps, const Budget& budget = {}) {
  detail::check_epsilon(eps);
  detail::require(k >= 0, "k must be >= 0");
  const auto pmf = detail::count_pmf(k, r, eps, budget);
  const std::uint64_t n = pmf.size() - 1;
  double e = 0.0;
  for (std::uint64_t j = 0; 2 * j <= n; ++j) e += (2 * j == n) ? 0.5 * pmf[j] : pmf[j];
  return std::clamp(e, 0.0, 0.5);
}

/// eps~(k) = (1 - (1 - 2 eps)^k) / 2.
inline double fraction_error_rate(int k, double eps) {
  detail::check_epsilon(eps);
  detail::require(k >= 0, "k must be >= 0");
  return 0.5 * (1.0 - std::pow(1.0 - 2.0 * eps, k));
}

inline double t_statistic(int k, std::uint64_t r, double eps, const Budget& budget = {}) {
  return fraction_error_rate(k, eps) - effective_error_rate(k, r, eps, budget);
}

// T_{k,r} as the weighted sum (1/N) sum_{l < N/2} l (P(X_k = l | -) - P(X_k = l | +)).
inline double t_statistic_direct(int k, std::uint64_t r, double eps, const Budget& budget = {}) {
  detail::check_epsilon(eps);
  const auto pmf = detail::count_pmf(k, r, eps, budget);
  const std::uint64_t n = pmf.size() - 1;
  double t = 0.0;
  for (std::uint64_t l = 0; 2 * l < n; ++l) t += static_cast<double>(l) * (pmf[n - l] - pmf[l]);
  return t / static_cast<double>(n);
}

struct EffectiveChannel {
  int k = 1;
  double eps_k = 0.0;
  double p_k = 1.0;
  double eps_tilde_k = 0.0;
  double t_stat = 0.0;
};

inline EffectiveChannel effective_channel(int k, std::uint64_t r, double eps, const Budget& budget = {}) {
  EffectiveChannel c;
  c.k = k;
  c.eps_k = effective_error_rate(k, r, eps, budget);
  c.p_k = 1.0 - 2.0 * c.eps_k;
  c.eps_tilde_k = fraction_error_rate(k, eps);
  c.t_stat = c.eps_tilde_k - c.eps_k;
  return c;
}

/// Delta_n = P(X_n > N/2 | +) - P(X_n < N/2 | +); ties net to zero.
inline double delta_exact(int n, std::uint64_t r, double eps, const Budget& budget = {}) {
  detail::check_epsilon(eps);
  return detail::signed_majority(detail::count_pmf(n, r, eps, budget));
}

/// Delta at true level (m+1)k under within-descent correction with the true
/// root pinned: one eps(k) edge into the renormalized root, then m levels of
/// T^(r^k) with error eps(k).
inline double renormalized_delta(int k, int m_levels, std::uint64_t r, double eps, const Budget& budget = {}) {
  detail::require(k >= 1 && m_levels >= 0, "need k >= 1 and m >= 0");
  const double ek = effective_error_rate(k, r, eps, budget);
  return (1.0 - 2.0 * ek) * delta_exact(m_levels, ipow(r, k), ek, budget);
}

/// eps_M = P(Bin(M, 1-eps) < M/2) + P(Bin(M, 1-eps) = M/2)/2.
inline double block_error_rate(std::uint64_t m, double eps) {
  detail::check_epsilon(eps);
  detail::require(m >= 1, "block size M must be >= 1");
  const auto pmf = binomial_pmf(m, 1.0 - eps);
  double e = 0.0;
  for (std::uint64_t j = 0; 2 * j <= m; ++j) e += (2 * j == m) ? 0.5 * pmf[j] : pmf[j];
  return std::clamp(e, 0.0, 0.5);
}

struct BlockSizeScan {
  std::uint64_t block_size = 0;  // M*, 0 when none within the limit
  double block_error = 0.5;
  double condition = 0.0;  // (1 - 2 eps_M)^2 r
};

/// Smallest M = r^j (j >= 0) with (1 - 2 eps_M)^2 r > 1, scanning up to max_block.
inline BlockSizeScan minimal_block_size(std::uint64_t r, double eps, std::uint64_t max_block = 1U << 20) {
  detail::require(r >= 2, "branching rate r must be >= 2");
  BlockSizeScan scan;
  for (std::uint64_t m = 1; m <= max_block; m *= r) {
    const double e = block_error_rate(m, eps);
    const double c = (1.0 - 2.0 * e) * (1.0 - 2.0 * e) * static_cast<double>(r);
    if (c > 1.0) return {m, e, c};
    if (m > max_block / r) break;
  }
  return scan;
}

struct CriticalEstimate {
  int k = 1;
  std::uint64_t r = 2;
  double p_lo = 0.0;
  double p_hi = 1.0;
  double tolerance = 1e-9;
  int iterations = 0;
  bool monotone = true;  // objective nondecreasing on the scan grid
  std::string decision_rule = "renormalized Kesten-Stigum (1-2eps(k))^2 r^k vs 1";

  [[nodiscard]] double p_c() const noexcept { return 0.5 * (p_lo + p_hi); }
};

// (1 - 2 eps(k))^2 r^k - 1 as a function of p = 1 - 2 eps.
inline double critical_objective(double p, int k, std::uint64_t r, const Budget& budget = {}) {
  const double eps = std::clamp(0.5 * (1.0 - p), 0.0, 0.5);
  const double pk = 1.0 - 2.0 * effective_error_rate(k, r, eps, budget);
  return pk * pk * static_cast<double>(ipow(r, k)) - 1.0;
}

/// Root of (1 - 2 eps(k))^2 r^k = 1 in p by bisection. The initial bracket
/// is [1/r - 0.05, 1/sqrt(r) + 0.05], clipped to (0, 1].
inline CriticalEstimate critical_point_k(int k, std::uint64_t r, double tol = 1e-9, const Budget& budget = {},
                                         int scan_points = 41) {
  detail::require(k >= 1, "k must be >= 1");
  detail::require(r >= 2, "branching rate r must be >= 2");
  detail::require(tol > 0.0, "tolerance must be > 0");
  detail::level_support(r, k, budget, "critical point");
  const double rd = static_cast<double>(r);
  double lo = std::max(1.0 / rd - 0.05, 1e-6);
  double hi = std::min(1.0 / std::sqrt(rd) + 0.05, 1.0);
  double flo = critical_objective(lo, k, r, budget);
  const double fhi = critical_objective(hi, k, r, budget);
  if (!(flo < 0.0 && fhi > 0.0)) {
    throw Error("no sign change of the critical objective on [" + std::to_string(lo) + ", " + std::to_string(hi) +
                "] for k=" + std::to_string(k) + ", r=" + std::to_string(r));
  }
  CriticalEstimate est;
  est.k = k;
  est.r = r;
  est.tolerance = tol;
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = critical_objective(mid, k, r, budget);
    if (fm < 0.0) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
    est.iterations = it + 1;
  }
  est.p_lo = lo;
  est.p_hi = hi;
  if (scan_points >= 2) {
    const double a = std::max(1.0 / rd - 0.05, 1e-6);
    const double b = std::min(1.0 / std::sqrt(rd) + 0.05, 1.0);
    double prev = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < scan_points; ++i) {
      const double p = a + (b - a) * i / (scan_points - 1);
      const double f = critical_objective(p, k, r, budget);
      if (f < prev - 1e-12) est.monotone = false;
      prev = f;
    }
  }
  return est;
}

// Bisection for the root of an increasing f on [lo, hi].
inline double solve_increasing(double lo, double hi, double tol, const auto& f) {
  double flo = f(lo);
  const double fhi = f(hi);
  if (!(flo < 0.0 && fhi > 0.0)) throw Error("no sign change on the bisection bracket");
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Regular-tree bounds for within-descent minority removal: the surviving
/// tree has between ceil(r^k/2) and r^k children per renormalized vertex, so
/// its critical p lies between p_c(k) on T^(r^k) and the root of
/// (1 - 2 eps(k))^2 ceil(r^k/2) = 1.
struct RemovalBounds {
  double lower = 0.0;
  double upper = 1.0;
};

inline RemovalBounds minority_removal_bounds(int k, std::uint64_t r, double tol = 1e-9, const Budget& budget = {}) {
  RemovalBounds b;
  b.lower = critical_point_k(k, r, tol, budget, 0).p_c();
  const double half = static_cast<double>((ipow(r, k) + 1) / 2);
  b.upper = solve_increasing(b.lower, 1.0, tol, [&](double p) {
    const double eps = std::clamp(0.5 * (1.0 - p), 0.0, 0.5);
    const double pk = 1.0 - 2.0 * effective_error_rate(k, r, eps, budget);
    return pk * pk * half - 1.0;
  });
  return b;
}

/// The four conditional advantages around a level-n majority, under a fair
/// root. Part iii is listed for every feasible level-(n-1) sum l > 0, part iv
/// for every lag 1..n.
struct ConditionalTable {
  int n = 1;
  std::uint64_t r = 2;
  double eps = 0.0;
  double part_i = 0.0;
  double part_ii = 0.0;
  std::vector<std::pair<std::int64_t, double>> part_iii;  // (l, value)
  std::vector<std::pair<int, double>> part_iv;            // (lag, value)

  [[nodiscard]] double min_value() const {
    double m = std::min(part_i, part_ii);
    for (const auto& [l, v] : part_iii) m = std::min(m, v);
    for (const auto& [lag, v] : part_iv) m = std::min(m, v);
    return m;
  }
};

namespace detail {

// joint[a][b] = P(X_{n-lag} = a, X_n = b | sigma_0 = +1).
inline std::vector<std::vector<double>> lag_joint(int n, int lag, std::uint64_t r, double eps, const Budget& budget) {
  const auto upper = count_pmf(n - lag, r, eps, budget);
  const std::uint64_t top = upper.size() - 1;
  std::vector<std::vector<double>> joint(top + 1);
  for (std::uint64_t a = 0; a <= top; ++a) {
    std::vector<double> pmf(top + 1, 0.0);
    pmf[a] = 1.0;
    for (int i = 0; i < lag; ++i) pmf = chain_step(pmf, r, eps);
    for (auto& x : pmf) x *= upper[a];
    joint[a] = std::move(pmf);
  }
  return joint;
}

// Advantage P(X_up > N'/2 | B) - P(X_up < N'/2 | B) with B = {X_n > N/2},
// fair root: the minus-root joint is the mirror image.
inline double conditional_advantage(const std::vector<std::vector<double>>& joint, bool condition_on_lower) {
  const std::uint64_t top = joint.size() - 1;
  const std::uint64_t bottom = joint[0].size() - 1;
  double num = 0.0;
  double den = 0.0;
  for (std::uint64_t a = 0; a <= top; ++a) {
    for (std::uint64_t b = 0; b <= bottom; ++b) {
      const double w = 0.5 * (joint[a][b] + joint[top - a][bottom - b]);
      if (w == 0.0) continue;
      const int sa = (2 * a > top) - (2 * a < top);
      const int sb = (2 * b > bottom) - (2 * b < bottom);
      const int cond = condition_on_lower ? sb : sa;
      const int target = condition_on_lower ? sa : sb;
      if (cond > 0) {
        den += w;
        num += w * target;
      }
    }
  }
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace detail

inline ConditionalTable lemma22_conditionals(int n, std::uint64_t r, double eps, const Budget& budget = {}) {
  detail::check_epsilon(eps);
  detail::require(n >= 1, "n must be >= 1");
  const std::uint64_t size = detail::level_support(r, n, budget, "conditionals");
  const std::uint64_t upper = size / r;
  ConditionalTable t;
  t.n = n;
  t.r = r;
  t.eps = eps;
  const auto joint1 = detail::lag_joint(n, 1, r, eps, budget);
  t.part_i = detail::conditional_advantage(joint1, true);
  t.part_ii = detail::conditional_advantage(joint1, false);
  // Part iii: a level-(n-1) configuration with sum l has (N' + l)/2 plus entries.
  for (std::uint64_t a = upper / 2 + 1; a <= upper; ++a) {
    std::vector<double> pmf(upper + 1, 0.0);
    pmf[a] = 1.0;
    const auto next = detail::chain_step(pmf, r, eps);
    t.part_iii.emplace_back(static_cast<std::int64_t>(2 * a) - static_cast<std::int64_t>(upper),
                            detail::signed_majority(next));
  }
  for (int lag = 1; lag <= n; ++lag) {
    t.part_iv.emplace_back(lag, detail::conditional_advantage(lag == 1 ? joint1 : detail::lag_joint(n, lag, r, eps, budget), true));
  }
  return t;
}

}  // namespace treecast
