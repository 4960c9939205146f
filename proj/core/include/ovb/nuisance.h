#ifndef OVB_NUISANCE_H_
#define OVB_NUISANCE_H_

// Nuisance models fit on a held-out fold: the short outcome model g and the
// short density ratio w = dQ/dP over the observed representation.

#include <cstdint>
#include <optional>
#include <string>

#include "ovb/dataset.h"

namespace ovb {

struct FoldPlan {
  RowIndices nuisance_source;
  RowIndices main_source;
  RowIndices nuisance_target;
  RowIndices main_target;
  std::uint64_t seed = 0;
};

// Deterministic shuffled split; round(frac * rows) rows go to the nuisance
// fold on each side. Every fold must keep at least 2 rows.
FoldPlan split_folds(Index n, Index m, double holdout_frac, std::uint64_t seed);
FoldPlan split_folds(const ShiftDataset& dataset, double holdout_frac,
                     std::uint64_t seed);

enum class OutcomeKind { kRidge, kNet };
enum class TargetMode { kPredictsLoss, kPredictsLabel };
// Output nonlinearity. Logistic and softmax outputs are fit by (penalized)
// maximum likelihood so predictions stay valid probabilities.
enum class OutputLink { kIdentity, kLogistic, kSoftmax };

OutputLink label_link(const LossFamily& family);

struct OutcomeConfig {
  OutcomeKind kind = OutcomeKind::kRidge;
  // Ridge penalty; unset means 1e-3 * trace(Xc'Xc) / d on centered features.
  std::optional<double> ridge_lambda;
  int net_width = 100;
  int net_max_iters = 2000;
  double net_step = 0.1;
  // Stop when the relative objective change falls below this.
  double net_tol = 1e-10;
};

struct OutcomeModel {
  OutcomeKind kind = OutcomeKind::kRidge;
  TargetMode mode = TargetMode::kPredictsLabel;
  OutputLink link = OutputLink::kIdentity;
  Index input_dim = 0;
  Index output_dim = 0;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  int iterations = 0;

  // Linear part (ridge): eta = x * coef + intercept.
  Matrix coef;             // input_dim x output_dim
  Eigen::RowVectorXd intercept;

  // One-hidden-layer tanh net on standardized inputs.
  Eigen::RowVectorXd input_mean;
  Eigen::RowVectorXd input_scale;
  Matrix hidden_weights;   // input_dim x width
  Eigen::RowVectorXd hidden_bias;
  Matrix output_weights;   // width x output_dim
  Eigen::RowVectorXd output_bias;
  // Identity-link nets learn standardized targets.
  Eigen::RowVectorXd target_mean;
  Eigen::RowVectorXd target_scale;

  Matrix predict(const Matrix& features) const;
};

// targets: rows(features) x k. Throws kShape on mismatch, kNumerical when
// ridge with lambda = 0 faces a singular Gram matrix.
OutcomeModel fit_outcome(const Matrix& features, const Matrix& targets,
                         const OutcomeConfig& config, TargetMode mode,
                         OutputLink link, std::uint64_t seed);

struct ClipBounds {
  double lo = 0.01;
  double hi = 100.0;
};

struct RatioPrediction {
  Vector weights;
  Index clipped_low = 0;
  Index clipped_high = 0;
};

struct DensityRatioModel {
  Vector coef;
  double intercept = 0.0;
  // n_P / n_Q of the fitting sample.
  double prior_correction = 1.0;
  ClipBounds clip;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  // Set when the domain classifier separates the fitting sample perfectly,
  // i.e. the overlap assumption looks violated.
  bool separable = false;

  Index input_dim() const { return coef.size(); }
  // Domain-classifier probability Pr(Q | x).
  Vector domain_probability(const Matrix& features) const;
  Vector predict_unclipped(const Matrix& features) const;
  RatioPrediction predict(const Matrix& features) const;
};

DensityRatioModel fit_density_ratio(const Matrix& source_features,
                                    const Matrix& target_features,
                                    std::uint64_t seed, ClipBounds clip = {});

// Convenience wrappers named after the operations they serve.
inline Matrix predict_outcome(const OutcomeModel& model,
                              const Matrix& features) {
  return model.predict(features);
}
inline Vector predict_ratio(const DensityRatioModel& model,
                            const Matrix& features) {
  return model.predict(features).weights;
}

struct NuisanceConfig {
  double holdout_frac = 0.30;
  ClipBounds clip;
  OutcomeConfig outcome;
  std::uint64_t seed = 0;
};

// Both nuisances share one held-out fold.
struct NuisanceSet {
  FoldPlan folds;
  OutcomeModel outcome;
  DensityRatioModel ratio;
};

// Fits g on (nuisance source rows, outcome_targets rows) and w on the
// nuisance rows of both domains. outcome_targets has one row per source row.
NuisanceSet fit_nuisances(const ShiftDataset& dataset, const FoldPlan& folds,
                          const Matrix& outcome_targets, TargetMode mode,
                          OutputLink link, const NuisanceConfig& config);

// GLM form: g predicts the label with the family's canonical output link.
NuisanceSet fit_glm_nuisances(const ShiftDataset& dataset,
                              const LossFamily& family,
                              const NuisanceConfig& config);

// Logistic regression by Newton's method with an L2 penalty on slopes.
// Returns (coef, intercept) for Pr(y = 1 | x). y entries are 0/1.
struct LogisticFit {
  Vector coef;
  double intercept = 0.0;
  int iterations = 0;
};
LogisticFit fit_logistic(const Matrix& features, const Vector& y,
                         double lambda);

}  // namespace ovb

#endif  // OVB_NUISANCE_H_
