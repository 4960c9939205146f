#include "ovb/glm.h"

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ovb/error.h"

namespace ovb {
namespace {

using V = std::vector<double>;

TEST(LogPartition, TableValues) {
  EXPECT_DOUBLE_EQ(log_partition(LossFamily::regression(), V{2.0}), 2.0);
  EXPECT_NEAR(log_partition(LossFamily::binary(), V{0.0}), std::log(2.0), 1e-12);
  EXPECT_NEAR(log_partition(LossFamily::multiclass(3), V{0, 0, 0}),
              std::log(3.0), 1e-12);
}

TEST(LogPartition, OverflowSafe) {
  EXPECT_NEAR(log_partition(LossFamily::binary(), V{800.0}), 800.0, 1e-9);
  EXPECT_NEAR(log_partition(LossFamily::binary(), V{-800.0}), 0.0, 1e-12);
  EXPECT_NEAR(log_partition(LossFamily::multiclass(2), V{1000.0, 1000.0}),
              1000.0 + std::log(2.0), 1e-9);
}

TEST(LogPartition, ShapeMismatchThrows) {
  try {
    log_partition(LossFamily::multiclass(3), V{0.0, 1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
}

TEST(LogPartition, ConvexAlongSegments) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 2.0);
  const LossFamily fams[] = {LossFamily::regression(), LossFamily::binary(),
                             LossFamily::multiclass(4),
                             LossFamily::seqgen(5, 3)};
  for (const auto& fam : fams) {
    for (int rep = 0; rep < 50; ++rep) {
      V a(fam.width()), b(fam.width()), mix(fam.width());
      for (auto& v : a) v = normal(rng);
      for (auto& v : b) v = normal(rng);
      const double lam = (rep % 11) / 10.0;
      for (int k = 0; k < fam.width(); ++k) mix[k] = lam * a[k] + (1 - lam) * b[k];
      EXPECT_LE(log_partition(fam, mix),
                lam * log_partition(fam, a) + (1 - lam) * log_partition(fam, b) +
                    1e-12);
    }
  }
}

TEST(MeanParam, TableValues) {
  EXPECT_DOUBLE_EQ(mean_param(LossFamily::regression(), V{-1.5})[0], -1.5);
  EXPECT_DOUBLE_EQ(mean_param(LossFamily::binary(), V{0.0})[0], 0.5);
  const V p = mean_param(LossFamily::multiclass(2), V{std::log(3.0), 0.0});
  EXPECT_NEAR(p[0], 0.75, 1e-12);
  EXPECT_NEAR(p[1], 0.25, 1e-12);
}

TEST(MeanParam, IsGradientOfLogPartition) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 1.5);
  const LossFamily fams[] = {LossFamily::regression(), LossFamily::binary(),
                             LossFamily::multiclass(4),
                             LossFamily::seqgen(5, 3)};
  for (const auto& fam : fams) {
    V eta(fam.width());
    for (auto& v : eta) v = normal(rng);
    const V mu = mean_param(fam, eta);
    for (int k = 0; k < fam.width(); ++k) {
      V up = eta, dn = eta;
      up[k] += 1e-5;
      dn[k] -= 1e-5;
      const double fd =
          (log_partition(fam, up) - log_partition(fam, dn)) / 2e-5;
      EXPECT_NEAR(fd, mu[k], 1e-6 * std::max(1.0, std::abs(mu[k])));
    }
  }
}

TEST(MeanParam, ProbabilitiesSumToOne) {
  const V p = mean_param(LossFamily::multiclass(5), V{3, -2, 0.5, 9, -40});
  double s = 0.0;
  for (double v : p) s += v;
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Nll, TableValues) {
  EXPECT_DOUBLE_EQ(nll(LossFamily::regression(), V{1.0}, V{1.0}), -0.5);
  EXPECT_NEAR(nll(LossFamily::binary(), V{0.0}, V{1.0}), std::log(2.0), 1e-12);
  EXPECT_NEAR(nll(LossFamily::multiclass(3), V{0, 0, 0}, V{0, 1, 0}),
              std::log(3.0), 1e-12);
}

TEST(Nll, RegressionDifferencesMatchHalfSquaredError) {
  const LossFamily reg = LossFamily::regression();
  for (double y : {-2.0, 0.3, 4.0}) {
    for (double a : {-1.0, 0.0, 2.5}) {
      for (double b : {0.7, -3.0}) {
        const double diff = nll(reg, V{a}, V{y}) - nll(reg, V{b}, V{y});
        const double ref = 0.5 * (y - a) * (y - a) - 0.5 * (y - b) * (y - b);
        EXPECT_NEAR(diff, ref, 1e-12);
      }
    }
  }
}

TEST(Nll, BinaryEqualsCrossEntropy) {
  for (double eta : {-4.0, -0.3, 0.0, 1.2, 6.0}) {
    const double p = 1.0 / (1.0 + std::exp(-eta));
    EXPECT_NEAR(nll(LossFamily::binary(), V{eta}, V{1.0}), -std::log(p), 1e-12);
    EXPECT_NEAR(nll(LossFamily::binary(), V{eta}, V{0.0}), -std::log(1 - p),
                1e-12);
  }
}

TEST(Nll, SeqgenWithOneStepEqualsMulticlass) {
  const V eta{0.3, -1.2, 2.0, 0.0, 0.5};
  const V y{0, 0, 1, 0, 0};
  EXPECT_EQ(nll(LossFamily::seqgen(5, 1), eta, y),
            nll(LossFamily::multiclass(5), eta, y));
}

TEST(Nll, SeqgenMasksSteps) {
  const LossFamily fam = LossFamily::seqgen(2, 3);
  const V eta{1, 0, 0, 1, 5, -5};
  const V y{1, 0, 0, 1, 0, 0};  // third step is padding
  const double two = nll(fam, eta, y, 2);
  const double expected = 2.0 * (std::log(std::exp(1.0) + 1.0) - 1.0);
  EXPECT_NEAR(two, expected, 1e-12);
}

TEST(GradNll, TableValues) {
  EXPECT_DOUBLE_EQ(grad_nll_eta(LossFamily::binary(), V{0.0}, V{1.0})[0], -0.5);
  EXPECT_DOUBLE_EQ(grad_nll_eta(LossFamily::regression(), V{1.7}, V{1.7})[0], 0.0);
}

TEST(GradNll, MatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal(0.0, 1.0);
  const LossFamily fams[] = {LossFamily::regression(), LossFamily::binary(),
                             LossFamily::multiclass(3),
                             LossFamily::seqgen(5, 3)};
  for (const auto& fam : fams) {
    for (int rep = 0; rep < 20; ++rep) {
      V eta(fam.width()), y(fam.width(), 0.0);
      for (auto& v : eta) v = normal(rng);
      if (fam.task() == Task::kRegression) {
        y[0] = normal(rng);
      } else if (fam.task() == Task::kBinary) {
        y[0] = rep % 2;
      } else {
        for (int t = 0; t < fam.max_steps(); ++t) {
          y[t * fam.classes() + (rep + t) % fam.classes()] = 1.0;
        }
      }
      const V g = grad_nll_eta(fam, eta, y);
      for (int k = 0; k < fam.width(); ++k) {
        V up = eta, dn = eta;
        up[k] += 1e-5;
        dn[k] -= 1e-5;
        const double fd = (nll(fam, up, y) - nll(fam, dn, y)) / 2e-5;
        EXPECT_NEAR(fd, g[k], 1e-6 * std::max(1.0, std::abs(g[k])));
      }
    }
  }
}

TEST(GradNll, MulticlassExample) {
  const V eta{1, 0, -1};
  const V g = grad_nll_eta(LossFamily::multiclass(3), eta, V{0, 1, 0});
  const double z = std::exp(1.0) + 1.0 + std::exp(-1.0);
  EXPECT_NEAR(g[0], std::exp(1.0) / z, 1e-12);
  EXPECT_NEAR(g[1], 1.0 / z - 1.0, 1e-12);
  EXPECT_NEAR(g[2], std::exp(-1.0) / z, 1e-12);
}

TEST(ValidateLabel, RejectsBadLabels) {
  EXPECT_THROW(validate_label(LossFamily::binary(), V{0.5}), Error);
  EXPECT_THROW(validate_label(LossFamily::multiclass(3), V{1, 1, 0}), Error);
  EXPECT_THROW(validate_label(LossFamily::multiclass(3), V{0.5, 0.5, 0}), Error);
  EXPECT_NO_THROW(validate_label(LossFamily::multiclass(3), V{0, 0, 1}));
}

TEST(LossFamily, ConstructionRules) {
  EXPECT_THROW(LossFamily::multiclass(1), Error);
  EXPECT_THROW(LossFamily::seqgen(3, 0), Error);
  EXPECT_EQ(LossFamily::seqgen(5, 3).width(), 15);
  EXPECT_EQ(LossFamily::from_name("multiclass", 4), LossFamily::multiclass(4));
  EXPECT_THROW(LossFamily::from_name("poisson"), Error);
}

}  // namespace
}  // namespace ovb
