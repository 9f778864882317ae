#include <gtest/gtest.h>

#include <set>

#include "treecast/correction.hpp"

using namespace treecast;

namespace {

GenerationSignals random_generation(int level, std::uint64_t n, std::uint64_t seed) {
  Stream rng(seed);
  GenerationSignals g(level, n, false);
  for (std::uint64_t i = 0; i < n; ++i) g.set(i, rng.coin());
  return g;
}

}  // namespace

TEST(Correction, SchemeTextRoundTrip) {
  for (const char* s : {"identity", "block-majority:64", "descent-majority:2", "fraction:3", "minority-removal:16",
                        "descent-minority:2"}) {
    EXPECT_EQ(CorrectionScheme::parse(s).describe(), s);
  }
  EXPECT_THROW(CorrectionScheme::parse("descent-majority"), DomainError);
  EXPECT_THROW(CorrectionScheme::parse("descent-majority:0"), DomainError);
  EXPECT_THROW(CorrectionScheme::parse("bogus:2"), DomainError);
  EXPECT_THROW(CorrectionScheme::parse("identity:2"), DomainError);
}

TEST(Correction, BlockMajorityIsIdempotent) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = random_generation(3, 100, seed);
    const auto part = partition_consecutive(3, 100, 8);
    const auto once = apply_block_majority(g, part, SeedSpec{seed, 0});
    const auto twice = apply_block_majority(once.signals, part, SeedSpec{seed + 1, 0});
    EXPECT_EQ(once.signals, twice.signals);
    EXPECT_EQ(twice.tied_blocks, 0U);
  }
}

TEST(Correction, LeftoverIsUntouchedAndExcluded) {
  const auto g = random_generation(2, 10, 4);
  const auto out = apply_block_majority(g, partition_consecutive(2, 10, 4), SeedSpec{});
  EXPECT_EQ(out.covered, 8U);
  ASSERT_TRUE(out.excluded);
  EXPECT_EQ(out.excluded->first, 9U);
  EXPECT_EQ(out.signals.is_plus(8), g.is_plus(8));
  EXPECT_EQ(out.signals.is_plus(9), g.is_plus(9));
  EXPECT_EQ(majority_statistic(out), majority_statistic(out.signals, 8));
}

TEST(Correction, BlockMajorityCommutesWithGlobalFlip) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto g = random_generation(1, 64, seed);
    const auto part = partition_consecutive(1, 64, 4);  // even blocks, so ties occur
    auto a = apply_block_majority(g, part, SeedSpec{seed, 0}).signals;
    g.flip_all();
    const auto b = apply_block_majority(g, part, SeedSpec{seed, 0}).signals;
    a.flip_all();
    EXPECT_EQ(a, b);
  }
}

// Changing one descent must leave every other block's output alone.
TEST(Correction, DescentLocality) {
  const RegularTreeSpec spec(2, 4);
  const auto part = descent_partition(4, 2, spec);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto g = random_generation(4, 16, seed);
    for (std::uint64_t victim = 0; victim < 4; ++victim) {
      auto h = g;
      for (std::uint64_t i = victim * 4; i < victim * 4 + 4; ++i) h.set(i, !h.is_plus(i));
      for (int which = 0; which < 3; ++which) {
        const SeedSpec s{seed, 2};
        const auto run = [&](const GenerationSignals& x) {
          if (which == 0) return apply_block_majority(x, part, s);
          if (which == 1) return apply_fraction_identification(x, part, s);
          return apply_minority_removal(x, part, s);
        };
        const auto a = run(g);
        const auto b = run(h);
        for (std::uint64_t i = 0; i < 16; ++i) {
          if (i / 4 == victim) continue;
          EXPECT_EQ(a.signals.is_plus(i), b.signals.is_plus(i));
        }
        if (which == 2) {
          std::vector<std::uint64_t> sa;
          std::vector<std::uint64_t> sb;
          for (auto v : *a.survivors) {
            if (v / 4 != victim) sa.push_back(v);
          }
          for (auto v : *b.survivors) {
            if (v / 4 != victim) sb.push_back(v);
          }
          EXPECT_EQ(sa, sb);
        }
      }
    }
  }
}

TEST(Correction, FractionIdentificationCopiesAMember) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = random_generation(2, 27, seed);
    const auto part = partition_consecutive(2, 27, 9);
    const auto out = apply_fraction_identification(g, part, SeedSpec{seed, 0});
    for (std::uint64_t b = 0; b < 3; ++b) {
      const auto plus = out.signals.plus_count(b * 9, 9);
      EXPECT_TRUE(plus == 0 || plus == 9);
      const auto src = g.plus_count(b * 9, 9);
      if (src == 0) {
        EXPECT_EQ(plus, 0U);
      }
      if (src == 9) {
        EXPECT_EQ(plus, 9U);
      }
    }
  }
}

TEST(Correction, MinorityRemovalSurvivorBounds) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    for (const std::uint64_t m : {4U, 5U, 16U}) {
      const auto g = random_generation(1, 83, seed);
      const auto part = partition_consecutive(1, 83, m);
      const auto out = apply_minority_removal(g, part, SeedSpec{seed, 0});
      ASSERT_TRUE(out.survivors);
      std::vector<std::uint64_t> per_block(part.block_count(), 0);
      for (const auto v : *out.survivors) {
        ASSERT_LT(v, part.covered());
        ++per_block[v / m];
      }
      for (std::uint64_t b = 0; b < part.block_count(); ++b) {
        EXPECT_GE(2 * per_block[b], m);
        EXPECT_LE(per_block[b], m);
        // survivors all carry the same sign
        std::set<bool> signs;
        for (const auto v : *out.survivors) {
          if (v / m == b) signs.insert(g.is_plus(v));
        }
        EXPECT_EQ(signs.size(), 1U);
      }
      const auto compact = survivors_only(out);
      EXPECT_EQ(compact.size(), out.survivors->size());
    }
  }
}

TEST(Correction, RenormalizeNeedsConstantBlocks) {
  const auto g = random_generation(2, 16, 9);
  const auto part = partition_consecutive(2, 16, 4);
  const auto corrected = apply_block_majority(g, part, SeedSpec{});
  const auto up = renormalize(corrected, part);
  EXPECT_EQ(up.size(), 4U);
  for (std::uint64_t b = 0; b < 4; ++b) EXPECT_EQ(up.is_plus(b), corrected.signals.is_plus(4 * b));
  GenerationSignals mixed(2, 16, true);
  mixed.set(0, false);
  EXPECT_THROW(renormalize(CorrectedGeneration::uncorrected(mixed), part), DomainError);
}

TEST(Correction, SchemeLevels) {
  const auto bm = CorrectionScheme::block_majority(64);
  EXPECT_EQ(bm.start_level(2), 6);
  EXPECT_FALSE(bm.corrects_at(5, 2));
  EXPECT_TRUE(bm.corrects_at(6, 2));
  EXPECT_EQ(bm.block_size_at(6, 2, 64), 64U);
  EXPECT_EQ(bm.block_size_at(7, 2, 128), 64U);
  const auto dm = CorrectionScheme::descent_majority(3);
  EXPECT_TRUE(dm.corrects_at(6, 2));
  EXPECT_FALSE(dm.corrects_at(4, 2));
  EXPECT_EQ(dm.block_size_at(6, 2, 64), 8U);
}

TEST(Correction, TrajectoryLevelSizes) {
  const auto ch = ChannelParams::from_epsilon(0.1);
  const RegularTreeSpec spec(2, 6);
  const auto traj = run_corrected_trajectory(spec, CorrectionScheme::descent_majority(2), ch, 6, SeedSpec{5, 0});
  ASSERT_EQ(traj.size(), 7U);
  for (int n = 0; n <= 6; ++n) {
    EXPECT_EQ(traj[n].level(), n);
    EXPECT_EQ(traj[n].signals.size(), ipow(2, n));
    EXPECT_EQ(traj[n].corrected(), n > 0 && n % 2 == 0);
  }
  EXPECT_THROW(run_corrected_trajectory(spec, CorrectionScheme::descent_majority(4), ch, 6, SeedSpec{}), DomainError);
}

TEST(Correction, OnlySurvivorsBranch) {
  const auto ch = ChannelParams::from_epsilon(0.2);
  const RegularTreeSpec spec(4, 4);
  const auto scheme = CorrectionScheme::descent_minority_removal(2);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto traj = run_corrected_trajectory(spec, scheme, ch, 4, SeedSpec{seed, 0});
    EXPECT_EQ(traj[3].signals.size(), traj[2].survivors->size() * 4);
    const auto tree = offspring_counts(traj, scheme, 4);
    EXPECT_TRUE(tree.valid_within_descent(4, 2));
  }
}

TEST(Correction, PerStepRemovalKeepsTwoChildBlocks) {
  const auto ch = ChannelParams::from_epsilon(0.25);
  const RegularTreeSpec spec(4, 5);
  const auto scheme = CorrectionScheme::minority_removal(4);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto traj = run_corrected_trajectory(spec, scheme, ch, 5, SeedSpec{seed, 0});
    EXPECT_TRUE(offspring_counts(traj, scheme, 4).valid_per_step(4));
  }
}
