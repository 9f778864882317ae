#include <gtest/gtest.h>

#include "treecast/broadcast.hpp"

using namespace treecast;

TEST(Broadcast, GlobalFlipCommutesWithTheChannel) {
  const auto ch = ChannelParams::from_epsilon(0.2);
  Stream rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    GenerationSignals parents(4, 37, false);
    for (std::uint64_t i = 0; i < parents.size(); ++i) parents.set(i, rng.coin());
    auto flipped = parents;
    flipped.flip_all();
    const SeedSpec seed{std::uint64_t(trial), 1};
    auto a = sample_next_generation(parents, 3, ch, seed);
    const auto b = sample_next_generation(flipped, 3, ch, seed);
    a.flip_all();
    EXPECT_EQ(a, b);
  }
}

TEST(Broadcast, NoiselessChannelCopies) {
  const auto ch = ChannelParams::from_epsilon(0.0);
  GenerationSignals g(0, 1, true);
  for (int n = 0; n < 5; ++n) g = sample_next_generation(g, 3, ch, SeedSpec{1, 0});
  EXPECT_EQ(g.size(), 243U);
  EXPECT_EQ(g.plus_count(), 243U);
}

TEST(Broadcast, ChildrenSitUnderTheirParent) {
  GenerationSignals parents(0, 3, false);
  parents.set(1, true);
  const auto kids = expand_generation(parents, 4);
  for (std::uint64_t i = 0; i < 12; ++i) EXPECT_EQ(kids.is_plus(i), i / 4 == 1);
}

TEST(Broadcast, FlipFrequencyMatchesEpsilon) {
  const auto ch = ChannelParams::from_epsilon(0.15);
  GenerationSignals root(0, 1, true);
  std::uint64_t minus = 0;
  std::uint64_t total = 0;
  for (std::uint64_t rep = 0; rep < 200; ++rep) {
    GenerationSignals g(9, 1000, true);
    const auto kids = sample_next_generation(g, 4, ch, SeedSpec{9, rep});
    minus += kids.size() - kids.plus_count();
    total += kids.size();
  }
  const double f = double(minus) / double(total);
  EXPECT_NEAR(f, 0.15, 5 * std::sqrt(0.15 * 0.85 / double(total)));
}

TEST(Broadcast, ChannelParameters) {
  const auto a = ChannelParams::from_epsilon(0.1);
  EXPECT_DOUBLE_EQ(a.p, 0.8);
  EXPECT_NEAR(std::tanh(a.beta), 0.8, 1e-15);
  EXPECT_DOUBLE_EQ(ChannelParams::from_p(0.4).epsilon, 0.3);
  EXPECT_THROW(ChannelParams::from_epsilon(0.5), DomainError);
  EXPECT_THROW(ChannelParams::from_epsilon(-0.1), DomainError);
  EXPECT_THROW(ChannelParams::from_p(0.0), DomainError);
}

TEST(Broadcast, VertexBudget) {
  Budget b;
  b.vertices_per_level = 100;
  GenerationSignals g(0, 60, true);
  EXPECT_THROW(sample_next_generation(g, 2, ChannelParams::from_epsilon(0.1), SeedSpec{}, b), BudgetError);
}
