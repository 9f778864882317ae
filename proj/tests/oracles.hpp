#pragma once
// Slow reference implementations used only by the tests.

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

inline double choose(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0.0;
  double c = 1.0;
  for (std::uint64_t i = 1; i <= k; ++i) c = c * double(n - k + i) / double(i);
  return c;
}

inline double binom(std::uint64_t n, double q, std::uint64_t j) {
  if (j > n) return 0.0;
  return choose(n, j) * std::pow(q, double(j)) * std::pow(1.0 - q, double(n - j));
}

// Law of the number of + leaves at depth n, root +, by enumerating every
// flip pattern on every edge of the r-ary tree.
inline std::vector<double> count_pmf_by_enumeration(std::uint64_t r, int n, double eps) {
  std::vector<std::uint64_t> level_sizes{1};
  std::uint64_t edges = 0;
  for (int i = 1; i <= n; ++i) {
    level_sizes.push_back(level_sizes.back() * r);
    edges += level_sizes.back();
  }
  const std::uint64_t leaves = level_sizes.back();
  std::vector<double> pmf(leaves + 1, 0.0);
  for (std::uint64_t pattern = 0; pattern < (std::uint64_t{1} << edges); ++pattern) {
    int flips = 0;
    std::uint64_t bit = 0;
    std::vector<int> cur{1};
    for (int i = 1; i <= n; ++i) {
      std::vector<int> next;
      for (const int v : cur) {
        for (std::uint64_t j = 0; j < r; ++j) {
          const bool flip = ((pattern >> bit++) & 1U) != 0;
          flips += flip ? 1 : 0;
          next.push_back(flip ? -v : v);
        }
      }
      cur = std::move(next);
    }
    std::uint64_t plus = 0;
    for (const int v : cur) plus += v > 0 ? 1 : 0;
    pmf[plus] += std::pow(eps, flips) * std::pow(1.0 - eps, double(edges) - flips);
  }
  return pmf;
}

// P(X' = j | X = m) with N parents, summed term by term.
inline std::vector<double> kernel_row(std::uint64_t r, std::uint64_t N, std::uint64_t m, double eps) {
  std::vector<double> row(r * N + 1, 0.0);
  for (std::uint64_t a = 0; a <= r * m; ++a) {
    for (std::uint64_t b = 0; b <= r * (N - m); ++b) {
      row[a + b] += binom(r * m, 1.0 - eps, a) * binom(r * (N - m), eps, b);
    }
  }
  return row;
}

inline std::vector<double> naive_chain(std::uint64_t r, int n, double eps) {
  std::vector<double> pmf{0.0, 1.0};
  std::uint64_t N = 1;
  for (int i = 0; i < n; ++i) {
    std::vector<double> next(r * N + 1, 0.0);
    for (std::uint64_t m = 0; m <= N; ++m) {
      if (pmf[m] == 0.0) continue;
      const auto row = kernel_row(r, N, m, eps);
      for (std::size_t j = 0; j < row.size(); ++j) next[j] += pmf[m] * row[j];
    }
    pmf = std::move(next);
    N *= r;
  }
  return pmf;
}

struct BruteDeltas {
  double ml = 0.0;
  double majority = 0.0;
};

// Sums over every spin configuration of the whole tree, including the
// hidden vertices, to get the observed laws under both root values.
inline BruteDeltas tree_deltas_brute(const std::vector<int>& parent, const std::vector<int>& observed, double eps) {
  const std::size_t nv = parent.size();
  const std::size_t L = observed.size();
  std::vector<double> law_plus(std::size_t{1} << L, 0.0);
  std::vector<double> law_minus(std::size_t{1} << L, 0.0);
  for (std::uint64_t c = 0; c < (std::uint64_t{1} << nv); ++c) {
    double w = 1.0;
    for (std::size_t v = 1; v < nv; ++v) {
      const bool same = (((c >> v) ^ (c >> parent[v])) & 1U) == 0;
      w *= same ? 1.0 - eps : eps;
    }
    std::uint64_t obs = 0;
    for (std::size_t i = 0; i < L; ++i) obs |= ((c >> observed[i]) & 1U) << i;
    ((c & 1U) != 0 ? law_plus : law_minus)[obs] += w;
  }
  BruteDeltas d;
  for (std::size_t x = 0; x < law_plus.size(); ++x) {
    d.ml += 0.5 * std::abs(law_plus[x] - law_minus[x]);
    const int s = 2 * std::popcount(x) - int(L);
    d.majority += s > 0 ? law_plus[x] : (s < 0 ? -law_plus[x] : 0.0);
  }
  return d;
}

}  // namespace oracle
