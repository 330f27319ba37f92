#include <gtest/gtest.h>

#include <cmath>

#include "mgstc/augmentation.hpp"
#include "mgstc/error.hpp"

using namespace mgstc;

TEST(AugmentationGap, WorkedExample) {
  auto v = augmentation_gap(GapParameters{1.0, 2.0, 0.5, 0.2, 1.5});
  // lambda = 1.5; plain = 0.5 / 1.5; augmented = 1 - (0.5 * 0.8 + 1.5) / (1.5 + 0.75)
  EXPECT_NEAR(v.plain, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(v.augmented, 1.0 - 1.9 / 2.25, 1e-15);
  EXPECT_NEAR(v.augmented, 0.1556, 5e-5);
}

TEST(AugmentationGap, VanishesAtLowerEdge) {
  GapParameters p{1.0, 3.0, 0.3, 1e-12, 2.0};
  auto v = augmentation_gap(p);
  EXPECT_NEAR(v.augmented, 0.0, 1e-11);
  EXPECT_NEAR(v.plain, 0.3 * 2.0 / gap_lambda(p), 1e-15);
  EXPECT_GT(v.plain, 0.0);
}

TEST(AugmentationGap, DomainChecks) {
  EXPECT_THROW(augmentation_gap({0.0, 2.0, 0.5, 0.2, 1.5}), DomainError);
  EXPECT_THROW(augmentation_gap({2.0, 2.0, 0.5, 0.2, 0.0}), DomainError);
  EXPECT_THROW(augmentation_gap({1.0, 2.0, 1.0, 0.2, 1.5}), DomainError);
  EXPECT_THROW(augmentation_gap({1.0, 2.0, 0.0, 0.2, 1.5}), DomainError);
  EXPECT_THROW(augmentation_gap({1.0, 2.0, 0.5, 0.0, 1.5}), DomainError);
  EXPECT_THROW(augmentation_gap({1.0, 2.0, 0.5, 0.2, 0.99}), DomainError);
  EXPECT_THROW(augmentation_gap({1.0, 2.0, 0.5, 0.2, 2.01}), DomainError);
}

TEST(AugmentationGap, SampledTuplesSatisfyInequality) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    auto p = sample_gap_parameters(rng);
    auto v = augmentation_gap(p);
    ASSERT_LT(v.augmented, v.plain);
    ASSERT_LE(p.xi, max_admissible_xi(p));
  }
}

TEST(AugmentationGap, AdmissibleBoundIsTight) {
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    auto p = sample_gap_parameters(rng);
    p.xi = max_admissible_xi(p) * (1.0 - 1e-9);
    auto below = augmentation_gap(p);
    p.xi = max_admissible_xi(p) * (1.0 + 1e-9);
    auto above = augmentation_gap(p);
    EXPECT_LT(below.augmented, below.plain);
    EXPECT_GT(above.augmented, above.plain);
  }
}

TEST(AugmentationGap, ClosedFormMatchesExplicitSpectralNorm) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    auto p = sample_gap_parameters(rng);
    const std::size_t dim = 2 + rng.index(31);
    const std::size_t groups = 1 + rng.index(std::min<std::size_t>(8, dim - 1));
    EXPECT_NEAR(explicit_gap_plain(p, dim, groups, rng), augmentation_gap(p).plain, 1e-8)
        << "T=" << dim << " K=" << groups;
  }
  EXPECT_THROW(explicit_gap_plain(GapParameters{}, 4, 4, rng), DomainError);
}

TEST(VerifyAppendix, ReportIsCleanAndReproducible) {
  auto a = verify_appendix(2000, 7);
  auto b = verify_appendix(2000, 7);
  EXPECT_EQ(a.trials, 2000u);
  EXPECT_EQ(a.violations, 0u);
  EXPECT_LT(a.max_spectral_error, 1e-8);
  EXPECT_EQ(a.spectral_checks, 200u);
  EXPECT_EQ(a.max_spectral_error, b.max_spectral_error);
  EXPECT_EQ(a.wide_xi_violations, b.wide_xi_violations);
  EXPECT_NEAR(a.example_values.plain, 1.0 / 3.0, 1e-15);
  EXPECT_THROW(verify_appendix(0, 1), ConfigError);
}
