#include "ovb/bounds.h"

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "ovb/error.h"
#include "ovb/synthlab.h"
#include "w1_rows.h"

namespace ovb {
namespace {

using V = std::vector<double>;
using testing::oracle_rows;

constexpr double kW1S = 0.42426406871192851;  // sqrt(0.5) * 0.6

TEST(OvbBound, Examples) {
  EXPECT_EQ(ovb_bound(0.0, 3.0, 2.0), 0.0);
  EXPECT_EQ(ovb_bound(1.0, 0.0, 2.0), 0.0);
  EXPECT_NEAR(ovb_bound(kW1S, std::sqrt(0.125), 1.0), 0.15, 1e-12);
  EXPECT_THROW(ovb_bound(-1.0, 1.0, 1.0), Error);
  EXPECT_THROW(ovb_bound(1.0, -1.0, 1.0), Error);
}

TEST(WorstCase, W1Example) {
  const auto r = worst_case(-0.5, SensitivityBudget::from_product(kW1S),
                            std::sqrt(0.125), 1.0);
  EXPECT_NEAR(r.worst_case, -0.35, 1e-12);
  EXPECT_NEAR(r.best_case, -0.65, 1e-12);
  EXPECT_EQ(r.ci_low, r.worst_case);
  EXPECT_EQ(r.ci_high, r.worst_case);
}

TEST(WorstCase, ZeroBudgetAndLinearity) {
  const auto zero = worst_case(1.25, SensitivityBudget::from_product(0.0), 0.7, 2.0);
  EXPECT_EQ(zero.worst_case, 1.25);
  EXPECT_EQ(zero.best_case, 1.25);
  const auto one = worst_case(1.25, SensitivityBudget::from_product(0.3), 0.7, 2.0);
  const auto two = worst_case(1.25, SensitivityBudget::from_product(0.6), 0.7, 2.0);
  EXPECT_EQ(two.bound_term, 2.0 * one.bound_term);
}

TEST(Budget, Components) {
  const auto b = SensitivityBudget::from_components(0.5, 2.0, 0.3);
  EXPECT_NEAR(b.s(), 0.3, 1e-12);
  EXPECT_TRUE(b.has_components());
  EXPECT_THROW(SensitivityBudget::from_components(1.5, 1.0, 1.0), Error);
  EXPECT_THROW(SensitivityBudget::from_product(-0.1), Error);
  EXPECT_NEAR(b.scaled(2.0).s(), 0.6, 1e-12);
}

TEST(TrueSensitivity, ErrorPaths) {
  const V g{1, 2, 3}, a{1, 2, 4}, t{0, 2, 5};
  EXPECT_THROW(true_sensitivity(g, g, a, V{1, 1, 1}, t), Error);  // rho
  EXPECT_THROW(true_sensitivity(g, V{0, 0, 0}, a, V{1, 1, 1}, V{0, 0, 0}),
               Error);  // perfect short model
  EXPECT_THROW(true_sensitivity(g, V{0, 0, 0}, V{0.1, 0.1, 0.1}, V{1, 1, 1}, t),
               Error);  // long overlap smaller
  EXPECT_THROW(true_sensitivity(g, V{0, 0}, a, a, t), Error);
}

TEST(EstimatedSensitivity, DegenerateCases) {
  const V g{1, 2, 3}, a{1, 2, 4}, t{0, 2, 5};
  const auto same_g = estimated_sensitivity(g, g, a, V{1, 1, 1}, t,
                                            SensitivitySource::kInferred);
  EXPECT_EQ(same_g.cy, 0.0);
  EXPECT_EQ(same_g.rho, 0.0);
  EXPECT_TRUE(same_g.degenerate);
  const auto same_a = estimated_sensitivity(g, V{0, 0, 0}, a, a, t,
                                            SensitivitySource::kInferred);
  EXPECT_EQ(same_a.cd, 0.0);
}

TEST(InferSensitivity, Examples) {
  EXPECT_NEAR(infer_sensitivity(-0.65, -0.5, std::sqrt(0.125), 1.0), kW1S, 1e-12);
  EXPECT_EQ(infer_sensitivity(0.3, 0.3, 0.5, 0.5), 0.0);
  EXPECT_NEAR(infer_sensitivity(0.7, 0.3, 0.5, 0.5),
              2.0 * infer_sensitivity(0.5, 0.3, 0.5, 0.5), 1e-12);
  EXPECT_THROW(infer_sensitivity(0.7, 0.3, 0.0, 0.5), Error);
  EXPECT_EQ(infer_sensitivity(0.3, 0.3, 0.0, 0.5), 0.0);
}

class W1Bounds : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    world_ = new OracleWorld(oracle_w1());
    sample_ = new WorldSample(sample_world(*world_, 50000, 50000, 21));
    const auto r = oracle_rows(*world_, *sample_, Form::kGeneral);
    rows_ = new EstimandRows(general_rows(r.loss_p, r.g_short_p, r.w_short_p,
                                          r.g_short_q, r.w_short_q, r.loss_q));
  }
  static void TearDownTestSuite() {
    delete rows_;
    delete sample_;
    delete world_;
  }
  static OracleWorld* world_;
  static WorldSample* sample_;
  static EstimandRows* rows_;
};
OracleWorld* W1Bounds::world_ = nullptr;
WorldSample* W1Bounds::sample_ = nullptr;
EstimandRows* W1Bounds::rows_ = nullptr;

TEST_F(W1Bounds, TrueSensitivityFromOracleNuisances) {
  const auto r = oracle_rows(*world_, *sample_, Form::kGeneral);
  const auto est =
      true_sensitivity(r.g_long_p, r.g_short_p, r.w_long_p, r.w_short_p, r.loss_p);
  EXPECT_NEAR(est.cy, 1.0, 0.02);
  EXPECT_NEAR(est.cd, 0.6, 0.02);
  EXPECT_NEAR(est.rho, std::sqrt(0.5), 0.02);
  EXPECT_EQ(est.source, SensitivitySource::kOracle);
}

TEST_F(W1Bounds, InferredRangeBracketsPoint) {
  BootstrapOptions opt;
  opt.replicates = 200;
  opt.seed = 4;
  const EvalReport rep = rows_->report();
  const auto range = infer_sensitivity_range(*rows_, *rep.test_loss, opt);
  EXPECT_GE(range.point, 0.40);
  EXPECT_LE(range.point, 0.45);
  EXPECT_LE(range.low, range.point);
  EXPECT_GE(range.high, range.point);
  EXPECT_LT(range.low, range.high);
  const auto paired = infer_sensitivity_range(*rows_, opt);
  EXPECT_TRUE(paired.paired);
  EXPECT_EQ(paired.point, range.point);
  EXPECT_LE(paired.low, paired.point);
  EXPECT_GE(paired.high, paired.point);
}

TEST_F(W1Bounds, TestLossInsideCiGivesZeroLow) {
  BootstrapOptions opt;
  opt.replicates = 200;
  const EvalReport rep = rows_->report();
  const auto range = infer_sensitivity_range(*rows_, rep.dr, opt);
  EXPECT_EQ(range.low, 0.0);
  EXPECT_EQ(range.point, 0.0);
}

TEST_F(W1Bounds, BootstrapDeterministicAndNested) {
  BootstrapOptions opt;
  opt.replicates = 1000;
  opt.seed = 9;
  const auto budget = SensitivityBudget::from_product(kW1S);
  const auto a = bootstrap_ci(*rows_, budget, opt);
  const auto b = bootstrap_ci(*rows_, budget, opt);
  EXPECT_EQ(a.dr_low, b.dr_low);
  EXPECT_EQ(a.worst_high, b.worst_high);
  EXPECT_LT(a.dr_low, a.dr_high);
  opt.level = 0.5;
  const auto narrow = bootstrap_ci(*rows_, budget, opt);
  EXPECT_GE(narrow.dr_low, a.dr_low);
  EXPECT_LE(narrow.dr_high, a.dr_high);

  const auto rep = worst_case_report(*rows_, budget, opt);
  EXPECT_LE(rep.ci_low, rep.worst_case);
  EXPECT_GE(rep.ci_high, rep.worst_case);
  EXPECT_GE(rep.worst_case, rep.l_dr_s);
  EXPECT_LE(rep.best_case, rep.l_dr_s);
}

TEST_F(W1Bounds, BootstrapRejectsBadOptions) {
  BootstrapOptions opt;
  opt.replicates = 50;
  EXPECT_THROW(bootstrap_ci(*rows_, SensitivityBudget::from_product(0.1), opt),
               Error);
  opt.replicates = 100;
  opt.level = 1.0;
  EXPECT_THROW(bootstrap_ci(*rows_, SensitivityBudget::from_product(0.1), opt),
               Error);
}

TEST(Bootstrap, IdenticalRowsAreDegenerate) {
  const V one(10, 1.0), zero(10, 0.0);
  const EstimandRows rows = general_rows(one, zero, one, zero, one, one);
  BootstrapOptions opt;
  opt.replicates = 100;
  EXPECT_THROW(infer_sensitivity_range(rows, 1.0, opt), Error);
}

TEST(Benchmark, W1LongShortApproachesOracle) {
  const OracleWorld world = oracle_w1();
  const WorldSample s = sample_world(world, 20000, 20000, 5);
  const auto r = oracle_rows(world, s, Form::kGlm);
  BenchmarkInputs in;
  in.long_source = s.long_source;
  in.long_target = s.long_target;
  in.short_columns = {0};
  in.source_labels = s.dataset.source_labels;
  in.eta_source = r.eta_p;
  const auto est = benchmark_sensitivity(in);
  EXPECT_NEAR(est.cy, 1.0, 0.1);
  EXPECT_NEAR(est.cd, 0.6, 0.1);
  EXPECT_NEAR(est.rho, std::sqrt(0.5), 0.1);
  EXPECT_EQ(est.source, SensitivitySource::kBenchmarked);

  in.short_columns = {0, 1};
  const auto same = benchmark_sensitivity(in);
  EXPECT_NEAR(same.cy, 0.0, 1e-6);
  EXPECT_NEAR(same.cd, 0.0, 1e-6);
}

TEST(Benchmark, LabelIndependentOfOmittedColumn) {
  SynthConfig c;
  c.d = 3;
  c.k = 2;
  c.coefficients = {1.0, 0.0};
  c.omit = {1};
  c.shift = {0.3, 0.5, 0.0};
  c.n = 8000;
  c.m = 8000;
  c.seed = 3;
  const GaussianSample s = sample_gaussian(c);
  BenchmarkInputs in;
  in.long_source = s.long_source;
  in.long_target = s.long_target;
  in.short_columns = s.observed;
  in.source_labels = s.dataset.source_labels;
  in.eta_source = s.dataset.source_features.col(0);
  const auto est = benchmark_sensitivity(in);
  EXPECT_NEAR(est.cy, 0.0, 0.05);
}

TEST(Benchmark, GlmFormRejectsMultiOutput) {
  BenchmarkInputs in;
  in.family = LossFamily::multiclass(3);
  in.long_source = Matrix::Zero(10, 2);
  in.long_target = Matrix::Zero(10, 2);
  in.short_columns = {0};
  in.source_labels = Matrix::Zero(10, 3);
  EXPECT_THROW(benchmark_sensitivity(in), Error);
}

TEST(KeptColumns, Complement) {
  EXPECT_EQ(kept_columns(5, {1, 3}), (std::vector<int>{0, 2, 4}));
  EXPECT_EQ(kept_columns(2, {}), (std::vector<int>{0, 1}));
}

}  // namespace
}  // namespace ovb
