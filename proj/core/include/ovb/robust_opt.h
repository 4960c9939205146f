#ifndef OVB_ROBUST_OPT_H_
#define OVB_ROBUST_OPT_H_

// Training a linear model f against the worst-case target loss
//   J(f) = L_dr(f) + s * sigma * nu(f),
// where in GLM form sigma is fixed by the label residuals and
// nu(f)^2 = mean_P[w^2 |eta(f)|^2]. Setting s = 0 gives the DR objective.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ovb/bounds.h"
#include "ovb/dataset.h"
#include "ovb/estimators.h"
#include "ovb/glm.h"
#include "ovb/nuisance.h"

namespace ovb {

struct LinearModel {
  LossFamily family = LossFamily::regression();
  Matrix weights;  // d x width
  Vector bias;     // width

  static LinearModel zeros(const LossFamily& family, Index d);
  Index input_dim() const { return weights.rows(); }
  Index num_params() const { return weights.size() + bias.size(); }
  Matrix eta(const Matrix& features) const;

  // Flat parameter order: weights row-major, then bias.
  Vector flat() const;
  void set_flat(const Vector& theta);
};

// Main-fold inputs to the objective, with nuisance predictions already
// evaluated. Labels and g live in label space.
struct GlmProblem {
  LossFamily family = LossFamily::regression();
  Matrix source_features;  // n x d
  Matrix source_labels;    // n x width
  Matrix source_g;         // n x width
  Vector source_w;         // n
  Matrix target_features;  // m x d
  Matrix target_g;         // m x width
  Vector target_w;         // m
  // Realized sequence lengths (seqgen only); empty means all steps.
  std::vector<int> source_steps;
  std::vector<int> target_steps;
  // Main-fold target labels when known.
  std::optional<Matrix> target_labels;

  Index n() const { return source_features.rows(); }
  Index m() const { return target_features.rows(); }
  Index d() const { return source_features.cols(); }
  // Label-space fidelity: mean_P |y - g|^2 (independent of f).
  double sigma2() const;
  void validate() const;
};

// Evaluates fitted nuisances on the main folds of `dataset`.
GlmProblem make_glm_problem(const ShiftDataset& dataset,
                            const LossFamily& family,
                            const NuisanceSet& nuisances);

enum class Objective { kUnadjusted, kDr, kWorstCase };
enum class Method { kGradientDescent, kLbfgs };

std::string objective_name(Objective objective);
Objective objective_from_name(const std::string& name);
std::string method_name(Method method);
Method method_from_name(const std::string& name);

struct OptConfig {
  double step_size = 1.0;
  int max_iters = 500;
  double grad_tol = 1e-8;
  std::uint64_t seed = 0;
  Objective objective = Objective::kDr;
  double s = 0.0;  // used by kWorstCase
  Method method = Method::kLbfgs;
  int lbfgs_memory = 10;

  void validate() const;
};

enum class OptStatus { kConverged, kMaxIters };
std::string status_name(OptStatus status);

struct OptTrace {
  std::vector<double> objective;
  std::vector<double> grad_norm;
  OptStatus status = OptStatus::kMaxIters;
  int iterations = 0;
};

struct ObjectiveParts {
  double dr = 0.0;
  double sigma = 0.0;
  double nu = 0.0;
  double value = 0.0;  // dr + s * sigma * nu
};

// Value and parts of the worst-case objective. s = 0 skips the penalty so the
// value equals the DR estimate exactly.
ObjectiveParts worst_case_parts(const LinearModel& model,
                                const GlmProblem& problem, double s);
double worst_case_objective(const LinearModel& model,
                            const GlmProblem& problem,
                            const SensitivityBudget& budget);

// Gradient with respect to the flat parameters (see LinearModel::flat).
// At nu = 0 the penalty contributes the subgradient 0.
Vector grad_objective(const LinearModel& model, const GlmProblem& problem,
                      const SensitivityBudget& budget);

// Mean source nll (unadjusted ERM) and its gradient.
double unadjusted_objective(const LinearModel& model,
                            const GlmProblem& problem);
Vector grad_unadjusted(const LinearModel& model, const GlmProblem& problem);

// Worst-case value with general-form nuisances: g predicts the loss of f,
// so sigma(f)^2 = mean_P[(l_f - g)^2] and nu^2 = mean_P[w^2]. Evaluation
// only; throws kInvalidArgument when g does not predict losses.
ObjectiveParts general_worst_case(const std::vector<double>& source_losses,
                                  const std::vector<double>& source_g,
                                  const std::vector<double>& source_w,
                                  const std::vector<double>& target_g,
                                  TargetMode g_mode, double s);

struct FitResult {
  LinearModel model;
  OptTrace trace;
};

// Zero-initialized deterministic descent. Throws kNumerical if the objective
// becomes non-finite.
FitResult fit(const GlmProblem& problem, const OptConfig& config);

// Main-fold rows of the trained model, for reports and bootstrap intervals.
EstimandRows model_rows(const LinearModel& model, const GlmProblem& problem);

// Optional held-out test sample scored by the true target loss.
struct TestSet {
  Matrix features;
  Matrix labels;
};

double test_loss(const LinearModel& model, const TestSet& test);

struct SweepRow {
  double s = 0.0;
  bool ok = false;
  std::string error;
  LinearModel model;
  OptTrace trace;
  double l_dr_s = 0.0;
  double sigma = 0.0;
  double nu = 0.0;
  double worst_case = 0.0;
  double best_case = 0.0;
  // Worst case of the s = 0 (DR) model at this s; nondecreasing in s.
  double worst_case_at_dr_model = 0.0;
  std::optional<double> test_loss;
};

// One fit per grid value (config.objective is overridden to worst_case).
// A failing row records its error and the sweep continues.
std::vector<SweepRow> sweep(const GlmProblem& problem,
                            const std::vector<double>& s_grid,
                            const OptConfig& config,
                            const std::optional<TestSet>& test = {});

}  // namespace ovb

#endif  // OVB_ROBUST_OPT_H_
