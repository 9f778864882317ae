#include <gtest/gtest.h>

#include "treecast/rng.hpp"
#include "treecast/signals.hpp"
#include "treecast/tree.hpp"

using namespace treecast;

TEST(Tree, ParentOfChildIsIdentity) {
  const RegularTreeSpec spec(3, 4);
  for (int n = 0; n < 4; ++n) {
    for (std::uint64_t s = 1; s <= spec.level_size(n); ++s) {
      const auto kids = children_range({n, s}, spec);
      EXPECT_EQ(kids.size(), 3U);
      for (auto c = kids.first; c <= kids.last; ++c) EXPECT_EQ(parent_of({n + 1, c}, spec), (Vertex{n, s}));
    }
  }
}

TEST(Tree, OverBudgetSpecThrows) {
  Budget b;
  b.vertices_per_level = 1000;
  EXPECT_THROW(RegularTreeSpec(2, 10, b), BudgetError);
  EXPECT_NO_THROW(RegularTreeSpec(2, 9, b));
  EXPECT_THROW(RegularTreeSpec(2, 70), BudgetError);
}

TEST(Tree, PartitionLeftover) {
  const auto part = partition_consecutive(10, 3);
  EXPECT_EQ(part.block_count(), 3U);
  EXPECT_EQ(part.covered(), 9U);
  ASSERT_TRUE(part.leftover());
  EXPECT_EQ(part.leftover()->first, 10U);
  EXPECT_EQ(part.block_of(9), 2U);
  EXPECT_FALSE(part.block_of(10));
  EXPECT_FALSE(partition_consecutive(9, 3).leftover());
}

TEST(Tree, DescentBlocksAreSubtrees) {
  const RegularTreeSpec spec(2, 6);
  const auto part = descent_partition(6, 2, spec);
  EXPECT_EQ(part.blocks.block_size, 4U);
  for (std::uint64_t b = 0; b < part.blocks.block_count(); ++b) {
    const auto range = part.blocks.block(b);
    for (auto s = range.first; s <= range.last; ++s) {
      const Vertex up = parent_of(parent_of({6, s}, spec), spec);
      EXPECT_EQ(up, part.ancestor(b));
    }
  }
  EXPECT_THROW(descent_partition(5, 2, spec), DomainError);
}

TEST(Tree, FirstBlockLevel) {
  EXPECT_EQ(first_block_level(1, 2), 0);
  EXPECT_EQ(first_block_level(32, 2), 5);
  EXPECT_EQ(first_block_level(33, 2), 5);
  EXPECT_EQ(first_block_level(31, 2), 4);
  EXPECT_EQ(first_block_level(9, 3), 2);
}

TEST(Signals, PlusCountMatchesValues) {
  Stream rng(7);
  for (std::uint64_t n : {1U, 63U, 64U, 65U, 200U}) {
    std::vector<int> v(n);
    for (auto& x : v) x = rng.coin() ? 1 : -1;
    const auto g = GenerationSignals::from_values(0, v);
    EXPECT_EQ(g.values(), v);
    for (std::uint64_t first = 0; first < n; first += 7) {
      const std::uint64_t count = std::min<std::uint64_t>(n - first, 70);
      std::uint64_t want = 0;
      for (std::uint64_t i = first; i < first + count; ++i) want += v[i] > 0 ? 1 : 0;
      EXPECT_EQ(g.plus_count(first, count), want);
    }
  }
}

TEST(Rng, StreamsArePureFunctionsOfTheSeedSpec) {
  const SeedSpec a{42, 3};
  auto s1 = a.stream(5, Purpose::Channel);
  auto s2 = SeedSpec{42, 0}.for_replicate(3).stream(5, Purpose::Channel);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(s1(), s2());
  auto s3 = a.stream(5, Purpose::Tie);
  auto s4 = a.stream(5, Purpose::Channel);
  EXPECT_NE(s3(), s4());
}

TEST(Rng, BernoulliWordFrequency) {
  Stream rng(11);
  for (const double q : {0.0, 0.1, 0.3, 0.5, 1.0}) {
    std::uint64_t ones = 0;
    const int words = 4000;
    for (int i = 0; i < words; ++i) ones += std::popcount(bernoulli_word(rng, q));
    const double n = 64.0 * words;
    const double f = double(ones) / n;
    EXPECT_NEAR(f, q, 5 * std::sqrt(q * (1 - q) / n) + 1e-12) << q;
  }
}

TEST(Rng, BelowIsUniform) {
  Stream rng(5);
  std::vector<int> hits(6, 0);
  for (int i = 0; i < 60000; ++i) ++hits[rng.below(6)];
  for (const int h : hits) EXPECT_NEAR(h, 10000, 500);
}
