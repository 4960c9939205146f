#include "ovb/robust_opt.h"

#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "ovb/error.h"
#include "ovb/synthlab.h"
#include "random_problem.h"
#include "w1_rows.h"

namespace ovb {
namespace {

using testing::column;
using testing::fd_relative_error;
using testing::random_model;
using testing::random_problem;

std::vector<double> as_vec(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

TEST(LinearModel, FlatRoundTrip) {
  LinearModel m = random_model(LossFamily::multiclass(3), 4, 1);
  const Vector theta = m.flat();
  EXPECT_EQ(theta.size(), 4 * 3 + 3);
  LinearModel z = LinearModel::zeros(LossFamily::multiclass(3), 4);
  z.set_flat(theta);
  EXPECT_EQ(z.weights, m.weights);
  EXPECT_EQ(z.bias, m.bias);
  EXPECT_EQ(theta(1), m.weights(0, 1));
  EXPECT_THROW(z.set_flat(Vector::Zero(3)), Error);
}

TEST(Objective, ZeroBudgetEqualsDrExactly) {
  const GlmProblem p = random_problem(LossFamily::binary(), 3, 40, 30, 2);
  const LinearModel m = random_model(p.family, 3, 2);
  const double dr =
      dr_glm(p.family, m.eta(p.source_features), m.eta(p.target_features),
             p.source_labels, p.source_g, p.target_g, as_vec(p.source_w));
  const auto parts = worst_case_parts(m, p, 0.0);
  EXPECT_EQ(parts.value, dr);
  EXPECT_EQ(worst_case_objective(m, p, SensitivityBudget::from_product(0.0)), dr);
}

TEST(Objective, UnitWeightsZeroGReduction) {
  GlmProblem p = random_problem(LossFamily::regression(), 3, 50, 40, 3);
  p.source_w.setOnes();
  p.source_g.setZero();
  p.target_g.setZero();
  const LinearModel m = random_model(p.family, 3, 3);
  const Matrix eq = m.eta(p.target_features);
  const Matrix ep = m.eta(p.source_features);
  const double direct = 0.5 * eq.squaredNorm() / p.m() -
                        ep.cwiseProduct(p.source_labels).sum() / p.n();
  EXPECT_NEAR(worst_case_parts(m, p, 0.0).value, direct, 1e-12);
}

TEST(Objective, W1WorstCaseOfIdentityModel) {
  const OracleWorld world = oracle_w1();
  const WorldSample s = sample_world(world, 50000, 50000, 8);
  const auto r = testing::oracle_rows(world, s, Form::kGlm);
  GlmProblem p;
  p.family = world.family;
  p.source_features = s.dataset.source_features;
  p.source_labels = s.dataset.source_labels;
  p.source_g = column(r.g_short_p);
  p.source_w = column(r.w_short_p).col(0);
  p.target_features = s.dataset.target_features;
  p.target_g = column(r.g_short_q);
  p.target_w = column(r.w_short_q).col(0);
  LinearModel m = LinearModel::zeros(world.family, 1);
  m.weights(0, 0) = 1.0;
  const auto parts = worst_case_parts(m, p, std::sqrt(0.5) * 0.6);
  EXPECT_NEAR(parts.dr, -0.50, 0.02);
  EXPECT_NEAR(parts.sigma * parts.sigma, 0.25, 0.01);
  EXPECT_NEAR(parts.nu * parts.nu, 0.5, 0.02);
  EXPECT_NEAR(parts.value, -0.35, 0.02);
}

struct FamilyCase {
  const char* name;
  LossFamily family;
};

class GradientCheck : public ::testing::TestWithParam<int> {};

TEST_P(GradientCheck, MatchesFiniteDifferences) {
  const FamilyCase cases[] = {{"regression", LossFamily::regression()},
                              {"binary", LossFamily::binary()},
                              {"multiclass", LossFamily::multiclass(4)},
                              {"seqgen", LossFamily::seqgen(5, 3)}};
  for (const auto& c : cases) {
    SCOPED_TRACE(c.name);
    const auto seed = static_cast<std::uint64_t>(GetParam());
    const GlmProblem p = random_problem(c.family, 3, 25, 20, seed);
    LinearModel m = random_model(c.family, 3, seed);
    const Vector theta = m.flat();
    for (double s : {0.0, 0.8}) {
      const auto budget = SensitivityBudget::from_product(s);
      const Vector g = grad_objective(m, p, budget);
      ASSERT_EQ(g.size(), m.num_params());
      const double err = fd_relative_error(theta, g, [&](const Vector& t) {
        LinearModel x = m;
        x.set_flat(t);
        return worst_case_objective(x, p, budget);
      });
      EXPECT_LT(err, 1e-5);
    }
    const Vector gu = grad_unadjusted(m, p);
    EXPECT_LT(fd_relative_error(theta, gu,
                                [&](const Vector& t) {
                                  LinearModel x = m;
                                  x.set_flat(t);
                                  return unadjusted_objective(x, p);
                                }),
              1e-5);
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, GradientCheck, ::testing::Range(0, 5));

TEST(Gradient, ZeroModelOnSymmetricData) {
  GlmProblem p = random_problem(LossFamily::regression(), 2, 20, 20, 4);
  for (Index i = 0; i < 10; ++i) {
    p.source_features.row(10 + i) = p.source_features.row(i);
    p.source_labels(10 + i, 0) = -p.source_labels(i, 0);
    p.source_w(10 + i) = p.source_w(i);
  }
  p.source_g.setZero();
  p.target_g.setZero();
  const LinearModel m = LinearModel::zeros(p.family, 2);
  const Vector g = grad_objective(m, p, SensitivityBudget::from_product(0.5));
  EXPECT_LT(g.cwiseAbs().maxCoeff(), 1e-12);
}

Matrix with_intercept(const Matrix& x) {
  Matrix a(x.rows(), x.cols() + 1);
  a << x, Matrix::Ones(x.rows(), 1);
  return a;
}

TEST(Fit, DrRegressionReachesClosedFormStationaryPoint) {
  const GlmProblem p = random_problem(LossFamily::regression(), 4, 300, 200, 6);
  const Matrix xq = with_intercept(p.target_features);
  const Matrix xp = with_intercept(p.source_features);
  const Vector resid = (p.source_labels - p.source_g).col(0);
  const Eigen::MatrixXd h = xq.transpose() * xq / p.m();
  const Eigen::VectorXd rhs = xq.transpose() * p.target_g.col(0) / p.m() +
                              xp.transpose() * p.source_w.cwiseProduct(resid) / p.n();
  const Eigen::VectorXd theta = h.ldlt().solve(rhs);

  OptConfig cfg;
  cfg.max_iters = 2000;
  cfg.grad_tol = 1e-12;
  const FitResult r = fit(p, cfg);
  const Vector got = r.model.flat();
  EXPECT_LT((got - theta).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE(r.trace.objective.back(), r.trace.objective.front());
}

TEST(Fit, UnadjustedRecoversNoiselessLinearWeights) {
  GlmProblem p = random_problem(LossFamily::regression(), 3, 200, 50, 7);
  for (Index i = 0; i < p.n(); ++i) {
    const auto x = p.source_features.row(i);
    p.source_labels(i, 0) = 1.5 * x(0) - 2.0 * x(1) + 0.25 * x(2) + 0.7;
  }
  OptConfig cfg;
  cfg.objective = Objective::kUnadjusted;
  cfg.grad_tol = 1e-12;
  cfg.max_iters = 2000;
  const FitResult r = fit(p, cfg);
  EXPECT_NEAR(r.model.weights(0, 0), 1.5, 1e-4);
  EXPECT_NEAR(r.model.weights(1, 0), -2.0, 1e-4);
  EXPECT_NEAR(r.model.weights(2, 0), 0.25, 1e-4);
  EXPECT_NEAR(r.model.bias(0), 0.7, 1e-4);
  EXPECT_EQ(r.trace.status, OptStatus::kConverged);
}

TEST(Fit, GradientDescentAlsoConverges) {
  const GlmProblem p = random_problem(LossFamily::binary(), 3, 200, 150, 8);
  OptConfig lb;
  lb.grad_tol = 1e-9;
  OptConfig gd = lb;
  gd.method = Method::kGradientDescent;
  gd.max_iters = 20000;
  const FitResult a = fit(p, lb);
  const FitResult b = fit(p, gd);
  EXPECT_NEAR(a.trace.objective.back(), b.trace.objective.back(), 1e-8);
}

TEST(Fit, WorstCaseZeroBudgetIsBitIdenticalToDr) {
  const GlmProblem p = random_problem(LossFamily::multiclass(3), 3, 80, 60, 9);
  OptConfig dr;
  OptConfig wc;
  wc.objective = Objective::kWorstCase;
  wc.s = 0.0;
  const FitResult a = fit(p, dr);
  const FitResult b = fit(p, wc);
  EXPECT_EQ(a.model.weights, b.model.weights);
  EXPECT_EQ(a.model.bias, b.model.bias);
  EXPECT_EQ(a.trace.objective, b.trace.objective);
}

TEST(Fit, Deterministic) {
  const GlmProblem p = random_problem(LossFamily::seqgen(4, 2), 3, 60, 40, 10);
  OptConfig cfg;
  cfg.objective = Objective::kWorstCase;
  cfg.s = 0.5;
  const FitResult a = fit(p, cfg);
  const FitResult b = fit(p, cfg);
  EXPECT_EQ(a.model.weights, b.model.weights);
  EXPECT_EQ(a.trace.grad_norm, b.trace.grad_norm);
}

TEST(Fit, ObjectiveNeverIncreases) {
  const GlmProblem p = random_problem(LossFamily::binary(), 4, 100, 100, 11);
  OptConfig cfg;
  cfg.objective = Objective::kWorstCase;
  cfg.s = 1.0;
  cfg.method = Method::kGradientDescent;
  const FitResult r = fit(p, cfg);
  for (std::size_t k = 1; k < r.trace.objective.size(); ++k) {
    EXPECT_LE(r.trace.objective[k], r.trace.objective[k - 1]);
  }
}

TEST(Config, Validation) {
  OptConfig c;
  c.step_size = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.s = -1.0;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_EQ(objective_from_name("worst_case"), Objective::kWorstCase);
  EXPECT_EQ(method_from_name(method_name(Method::kGradientDescent)),
            Method::kGradientDescent);
  EXPECT_THROW(objective_from_name("minimax"), Error);
}

TEST(Problem, ValidateCatchesShapes) {
  GlmProblem p = random_problem(LossFamily::regression(), 2, 10, 10, 12);
  EXPECT_NO_THROW(p.validate());
  p.target_g = Matrix::Zero(9, 1);
  EXPECT_THROW(p.validate(), Error);
}

TEST(GeneralWorstCase, RequiresLossPredictions) {
  const std::vector<double> l{1, 2, 3}, g{1, 1, 2}, w{1, 1, 1}, gq{1, 2};
  EXPECT_THROW(
      general_worst_case(l, g, w, gq, TargetMode::kPredictsLabel, 0.5), Error);
  const auto parts =
      general_worst_case(l, g, w, gq, TargetMode::kPredictsLoss, 0.5);
  EXPECT_NEAR(parts.dr, 2.0 / 3.0 + 1.5, 1e-12);
  EXPECT_NEAR(parts.value, parts.dr + 0.5 * parts.sigma * parts.nu, 1e-12);
}

TEST(Sweep, SingleZeroRowIsDr) {
  const GlmProblem p = random_problem(LossFamily::regression(), 3, 80, 60, 13);
  const OptConfig cfg;
  const auto rows = sweep(p, {0.0}, cfg);
  ASSERT_EQ(rows.size(), 1u);
  const FitResult dr = fit(p, cfg);
  EXPECT_TRUE(rows[0].ok);
  EXPECT_EQ(rows[0].model.weights, dr.model.weights);
  EXPECT_EQ(rows[0].l_dr_s, rows[0].worst_case);
  EXPECT_FALSE(rows[0].test_loss.has_value());
}

TEST(Sweep, WorstCaseAtDrModelNondecreasing) {
  const GlmProblem p = random_problem(LossFamily::binary(), 3, 80, 60, 14);
  TestSet test{p.target_features, Matrix::Zero(p.m(), 1)};
  const auto rows = sweep(p, {0.0, 0.25, 0.5, 1.0, 2.0}, OptConfig{}, test);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    EXPECT_GE(rows[k].worst_case_at_dr_model, rows[k - 1].worst_case_at_dr_model);
    EXPECT_TRUE(std::isfinite(rows[k].worst_case));
    EXPECT_TRUE(rows[k].test_loss.has_value());
    EXPECT_LE(rows[k].worst_case, rows[k].worst_case_at_dr_model + 1e-9);
  }
  EXPECT_THROW(sweep(p, {}, OptConfig{}), Error);
  EXPECT_THROW(sweep(p, {0.0, -1.0}, OptConfig{}), Error);
}

TEST(TestLoss, MatchesNll) {
  TestSet t{column({0.0, 1.0}), column({1.0, 3.0})};
  LinearModel m = LinearModel::zeros(LossFamily::regression(), 1);
  m.weights(0, 0) = 2.0;
  // nll = -(y eta - eta^2 / 2): rows give 0 and -(6 - 2)
  EXPECT_DOUBLE_EQ(test_loss(m, t), -2.0);
}

}  // namespace
}  // namespace ovb
