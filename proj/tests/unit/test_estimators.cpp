#include <gtest/gtest.h>

#include "treecast/estimators.hpp"

using namespace treecast;

TEST(Estimators, NormalQuantile) {
  EXPECT_NEAR(normal_quantile(0.95), 1.959963985, 1e-8);
  EXPECT_NEAR(normal_quantile(0.99), 2.575829304, 1e-8);
}

TEST(Estimators, WilsonInterval) {
  const auto i = wilson_interval(50, 100, 1.96);
  EXPECT_NEAR(0.5 * (i.lo + i.hi), 0.5, 1e-12);
  EXPECT_TRUE(i.contains(0.5));
  const auto z = wilson_interval(0, 100, 1.96);
  EXPECT_EQ(z.lo, 0.0);
  EXPECT_GT(z.hi, 0.0);
}

TEST(Estimators, DeterministicAcrossWorkerCounts) {
  McConfig cfg;
  cfg.r = 3;
  cfg.replicates = 300;
  cfg.depth = 4;
  cfg.scheme = CorrectionScheme::descent_majority(2);
  cfg.channel = ChannelParams::from_epsilon(0.2);
  cfg.seed = SeedSpec{2024, 0};
  cfg.workers = 1;
  const auto a = mc_delta(cfg);
  cfg.workers = 4;
  const auto b = mc_delta(cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].plus, b[i].plus);
    EXPECT_EQ(a[i].minus, b[i].minus);
  }
}

TEST(Estimators, McAgreesWithExactIdentity) {
  McConfig cfg;
  cfg.r = 2;
  cfg.replicates = 20000;
  cfg.depth = 5;
  cfg.channel = ChannelParams::from_epsilon(0.1);
  cfg.seed = SeedSpec{31, 0};
  const auto est = mc_delta(cfg);
  for (int n = 0; n <= 5; ++n) {
    const double exact = *exact_counterpart(cfg.scheme, 2, 0.1, n);
    EXPECT_NEAR(est[n].delta_hat, exact, 4 * est[n].se + 1e-12) << n;
  }
}

TEST(Estimators, McEffectiveErrorAgreesWithExact) {
  const auto est = mc_effective_error(CorrectionScheme::descent_majority(3), 2, 0.15, 20000, SeedSpec{8, 0});
  EXPECT_NEAR(est.eps_hat, effective_error_rate(3, 2, 0.15), 4 * est.se);
  const auto blk = mc_effective_error(CorrectionScheme::block_majority(5), 2, 0.3, 20000, SeedSpec{9, 0});
  EXPECT_NEAR(blk.eps_hat, block_error_rate(5, 0.3), 4 * blk.se);
}

TEST(Estimators, ExactCounterparts) {
  const auto dm = CorrectionScheme::descent_majority(2);
  EXPECT_FALSE(exact_counterpart(dm, 2, 0.1, 3));
  EXPECT_NEAR(*exact_counterpart(dm, 2, 0.1, 4, PinMode::RenormalizedRoot),
              delta_exact(1, 4, effective_error_rate(2, 2, 0.1)), 1e-15);
  EXPECT_NEAR(*exact_counterpart(dm, 2, 0.1, 4), renormalized_delta(2, 1, 2, 0.1), 1e-15);
  EXPECT_FALSE(exact_counterpart(CorrectionScheme::descent_minority_removal(2), 4, 0.1, 4));
}

TEST(Estimators, ConfigValidation) {
  McConfig cfg;
  cfg.replicates = 10;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg.replicates = 100;
  cfg.scheme = CorrectionScheme::descent_majority(3);
  cfg.depth = 4;
  EXPECT_THROW(cfg.validate(), DomainError);
}

TEST(Parallel, MapKeepsOrderAndRethrows) {
  const auto v = parallel_map(100, [](std::uint64_t i) { return i * i; }, 4);
  for (std::uint64_t i = 0; i < 100; ++i) EXPECT_EQ(v[i], i * i);
  EXPECT_THROW(parallel_map(
                   10,
                   [](std::uint64_t i) -> int {
                     if (i == 7) throw DomainError("x");
                     return 0;
                   },
                   3),
               DomainError);
}
