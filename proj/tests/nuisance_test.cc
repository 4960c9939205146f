#include "ovb/nuisance.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "ovb/error.h"
#include "ovb/numeric.h"
#include "ovb/synthlab.h"

namespace ovb {
namespace {

TEST(SplitFolds, SizesAndDisjointness) {
  const FoldPlan f = split_folds(10, 20, 0.3, 4);
  EXPECT_EQ(f.nuisance_source.size(), 3u);
  EXPECT_EQ(f.main_source.size(), 7u);
  EXPECT_EQ(f.nuisance_target.size(), 6u);
  EXPECT_EQ(f.main_target.size(), 14u);
  std::set<std::size_t> all(f.nuisance_source.begin(), f.nuisance_source.end());
  all.insert(f.main_source.begin(), f.main_source.end());
  EXPECT_EQ(all.size(), 10u);
  EXPECT_EQ(*all.rbegin(), 9u);
}

TEST(SplitFolds, DeterministicPerSeed) {
  const FoldPlan a = split_folds(100, 100, 0.3, 8);
  const FoldPlan b = split_folds(100, 100, 0.3, 8);
  const FoldPlan c = split_folds(100, 100, 0.3, 9);
  EXPECT_EQ(a.main_source, b.main_source);
  EXPECT_EQ(a.nuisance_target, b.nuisance_target);
  EXPECT_NE(a.main_source, c.main_source);
}

TEST(SplitFolds, RejectsTinyFolds) {
  EXPECT_THROW(split_folds(3, 10, 0.3, 0), Error);
  EXPECT_THROW(split_folds(10, 10, 1.2, 0), Error);
}

TEST(Ridge, RecoversExactLinearFunction) {
  auto rng = make_engine(1);
  std::normal_distribution<double> normal;
  Matrix x(200, 3), y(200, 1);
  for (Index i = 0; i < 200; ++i) {
    for (Index k = 0; k < 3; ++k) x(i, k) = normal(rng);
    y(i, 0) = 2.0 * x(i, 0) - x(i, 1) + 0.5 * x(i, 2) + 3.0;
  }
  OutcomeConfig cfg;
  cfg.ridge_lambda = 0.0;
  const OutcomeModel m = fit_outcome(x, y, cfg, TargetMode::kPredictsLabel,
                                     OutputLink::kIdentity, 0);
  EXPECT_NEAR(m.coef(0, 0), 2.0, 1e-8);
  EXPECT_NEAR(m.coef(1, 0), -1.0, 1e-8);
  EXPECT_NEAR(m.intercept(0), 3.0, 1e-8);
  EXPECT_NEAR((m.predict(x) - y).cwiseAbs().maxCoeff(), 0.0, 1e-8);
}

TEST(Ridge, SingularGramWithoutPenaltyFails) {
  Matrix x(5, 2);
  x << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10;
  Matrix y = Matrix::Ones(5, 1);
  OutcomeConfig cfg;
  cfg.ridge_lambda = 0.0;
  try {
    fit_outcome(x, y, cfg, TargetMode::kPredictsLabel, OutputLink::kIdentity, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumerical);
  }
}

TEST(Outcome, ShapeMismatchThrows) {
  try {
    fit_outcome(Matrix::Zero(4, 2), Matrix::Zero(3, 1), {},
                TargetMode::kPredictsLabel, OutputLink::kIdentity, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
}

class W1Nuisances : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    sample_ = new WorldSample(sample_world(oracle_w1(), 20000, 20000, 3));
  }
  static void TearDownTestSuite() { delete sample_; }
  static WorldSample* sample_;
};
WorldSample* W1Nuisances::sample_ = nullptr;

TEST_F(W1Nuisances, ShortOutcomeMatchesConditionalMean) {
  const auto& ds = sample_->dataset;
  const OutcomeModel m =
      fit_outcome(ds.source_features, ds.source_labels, {},
                  TargetMode::kPredictsLabel, OutputLink::kIdentity, 0);
  Matrix x(2, 1);
  x << 0, 1;
  const Matrix g = m.predict(x);
  EXPECT_NEAR(g(0, 0), 0.5, 0.03);
  EXPECT_NEAR(g(1, 0), 1.5, 0.03);
}

TEST_F(W1Nuisances, NetOutcomeMatchesConditionalMean) {
  const auto& ds = sample_->dataset;
  OutcomeConfig cfg;
  cfg.kind = OutcomeKind::kNet;
  cfg.net_width = 8;
  cfg.net_max_iters = 300;
  const OutcomeModel a = fit_outcome(ds.source_features, ds.source_labels, cfg,
                                     TargetMode::kPredictsLabel,
                                     OutputLink::kIdentity, 5);
  const OutcomeModel b = fit_outcome(ds.source_features, ds.source_labels, cfg,
                                     TargetMode::kPredictsLabel,
                                     OutputLink::kIdentity, 5);
  Matrix x(2, 1);
  x << 0, 1;
  const Matrix g = a.predict(x);
  EXPECT_NEAR(g(0, 0), 0.5, 0.05);
  EXPECT_NEAR(g(1, 0), 1.5, 0.05);
  EXPECT_EQ(g, b.predict(x));
}

TEST_F(W1Nuisances, DensityRatios) {
  const DensityRatioModel lng =
      fit_density_ratio(sample_->long_source, sample_->long_target, 0);
  Matrix z(2, 2);
  z << 1, 1, 1, 0;
  const Vector w = lng.predict(z).weights;
  EXPECT_NEAR(w(0), 1.6, 0.08);
  EXPECT_NEAR(w(1), 0.4, 0.03);
  EXPECT_FALSE(lng.separable);

  const auto& ds = sample_->dataset;
  const DensityRatioModel shrt =
      fit_density_ratio(ds.source_features, ds.target_features, 0);
  Matrix x(2, 1);
  x << 0, 1;
  const Vector ws = shrt.predict(x).weights;
  EXPECT_NEAR(ws(0), 1.0, 0.05);
  EXPECT_NEAR(ws(1), 1.0, 0.05);
}

TEST(DensityRatio, ClippingCountsAndBounds) {
  DensityRatioModel m;
  m.coef = Vector::Constant(1, 10.0);
  m.clip = {0.1, 5.0};
  Matrix x(3, 1);
  x << -3, 0, 3;
  const RatioPrediction p = m.predict(x);
  EXPECT_DOUBLE_EQ(p.weights(0), 0.1);
  EXPECT_DOUBLE_EQ(p.weights(1), 1.0);
  EXPECT_DOUBLE_EQ(p.weights(2), 5.0);
  EXPECT_EQ(p.clipped_low, 1);
  EXPECT_EQ(p.clipped_high, 1);
}

TEST(DensityRatio, SeparableSampleIsFlagged) {
  Matrix s(20, 1), t(20, 1);
  for (Index i = 0; i < 20; ++i) {
    s(i, 0) = -1.0 - 0.1 * i;
    t(i, 0) = 1.0 + 0.1 * i;
  }
  EXPECT_TRUE(fit_density_ratio(s, t, 0).separable);
}

TEST(Logistic, RecoversSlopeSign) {
  auto rng = make_engine(2);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  Matrix x(4000, 1);
  Vector y(4000);
  for (Index i = 0; i < 4000; ++i) {
    x(i, 0) = normal(rng);
    y(i) = unif(rng) < sigmoid(1.5 * x(i, 0) - 0.5) ? 1.0 : 0.0;
  }
  const LogisticFit fit = fit_logistic(x, y, 0.0);
  EXPECT_NEAR(fit.coef(0), 1.5, 0.15);
  EXPECT_NEAR(fit.intercept, -0.5, 0.1);
}

TEST(GlmNuisances, BinaryPredictionsAreProbabilities) {
  const WorldSample s = sample_world(oracle_w2(), 4000, 4000, 1);
  NuisanceConfig cfg;
  cfg.seed = 2;
  const NuisanceSet ns = fit_glm_nuisances(s.dataset, oracle_w2().family, cfg);
  const Matrix g = ns.outcome.predict(s.dataset.source_features);
  EXPECT_GE(g.minCoeff(), 0.0);
  EXPECT_LE(g.maxCoeff(), 1.0);
  EXPECT_EQ(ns.outcome.link, OutputLink::kLogistic);
  const NuisanceSet again =
      fit_glm_nuisances(s.dataset, oracle_w2().family, cfg);
  EXPECT_EQ(ns.ratio.coef, again.ratio.coef);
  EXPECT_EQ(ns.folds.main_source, again.folds.main_source);
}

}  // namespace
}  // namespace ovb
