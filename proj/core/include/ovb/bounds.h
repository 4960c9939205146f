#ifndef OVB_BOUNDS_H_
#define OVB_BOUNDS_H_

// Omitted-variable-bias bounds on target loss. With fidelity sigma, overlap
// nu and sensitivity parameters (rho, C_Y, C_D),
//   |L_dr_short - L_dr_long| <= rho * C_Y * C_D * sigma * nu,
// so the target loss lies in L_dr_short -/+ s * sigma * nu for any
// budget s >= rho * C_Y * C_D.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ovb/dataset.h"
#include "ovb/estimators.h"
#include "ovb/nuisance.h"

namespace ovb {

class SensitivityBudget {
 public:
  static SensitivityBudget from_product(double s);
  // rho_max in [0, 1]; cy_max, cd_max >= 0.
  static SensitivityBudget from_components(double rho_max, double cy_max,
                                           double cd_max);

  double s() const { return s_; }
  bool has_components() const { return rho_max_.has_value(); }
  std::optional<double> rho_max() const { return rho_max_; }
  std::optional<double> cy_max() const { return cy_max_; }
  std::optional<double> cd_max() const { return cd_max_; }
  SensitivityBudget scaled(double factor) const;

 private:
  explicit SensitivityBudget(double s) : s_(s) {}

  double s_;
  std::optional<double> rho_max_;
  std::optional<double> cy_max_;
  std::optional<double> cd_max_;
};

enum class SensitivitySource { kOracle, kInferred, kBenchmarked };
std::string source_name(SensitivitySource source);

struct SensitivityEstimate {
  double cy = 0.0;
  double cd = 0.0;
  double rho = 0.0;
  SensitivitySource source = SensitivitySource::kOracle;
  // Set when a residual difference had zero variance and rho was reported as
  // 0 instead of failing.
  bool degenerate = false;

  double product() const { return rho * cy * cd; }
};

struct WorstCaseReport {
  double l_dr_s = 0.0;
  double sigma = 0.0;
  double nu = 0.0;
  double bound_term = 0.0;
  double worst_case = 0.0;
  double best_case = 0.0;
  // Confidence interval on worst_case; equals [worst_case, worst_case] until a
  // bootstrap fills it in.
  double ci_low = 0.0;
  double ci_high = 0.0;
  SensitivityBudget budget = SensitivityBudget::from_product(0.0);
};

// s * sigma * nu. Throws kInvalidArgument on a negative input.
double ovb_bound(double s, double sigma, double nu);

WorstCaseReport worst_case(double l_dr_s, const SensitivityBudget& budget,
                           double sigma, double nu);

// Sensitivity parameters from long and short nuisances evaluated on the same
// source rows. residual_targets are what g predicts (labels or losses).
//   cy  = sqrt(mean[(gL - gS)^2] / mean[(target - gS)^2])
//   cd  = sqrt((mean[aL^2] - mean[aS^2]) / mean[aS^2])
//   rho = |corr(gL - gS, aL - aS)|
SensitivityEstimate true_sensitivity(std::span<const double> g_long,
                                     std::span<const double> g_short,
                                     std::span<const double> alpha_long,
                                     std::span<const double> alpha_short,
                                     std::span<const double> residual_targets);

// Same formulas, but clamps a negative C_D^2 to 0 and reports rho = 0 (with
// `degenerate` set) when a difference has zero variance. Used for estimated
// nuisances where sampling noise can cross those edges.
SensitivityEstimate estimated_sensitivity(
    std::span<const double> g_long, std::span<const double> g_short,
    std::span<const double> alpha_long, std::span<const double> alpha_short,
    std::span<const double> residual_targets, SensitivitySource source);

// s* = |l_test - l_dr_s| / (sigma * nu).
double infer_sensitivity(double l_test, double l_dr_s, double sigma, double nu);

struct BootstrapOptions {
  int replicates = 1000;
  std::uint64_t seed = 0;
  double level = 0.95;
};

struct BootstrapCi {
  double dr_low = 0.0;
  double dr_high = 0.0;
  double worst_low = 0.0;
  double worst_high = 0.0;
  double best_low = 0.0;
  double best_high = 0.0;
  int replicates = 0;
};

// Percentile bootstrap over main-fold rows, resampling source and target rows
// independently with nuisances held fixed. Replicate b draws from the
// substream (seed, b), so results do not depend on evaluation order.
BootstrapCi bootstrap_ci(const EstimandRows& rows,
                         const SensitivityBudget& budget,
                         const BootstrapOptions& options);

// Point report plus the bootstrap interval on worst_case. The interval is
// widened if needed so that it always contains the point estimate.
WorstCaseReport worst_case_report(const EstimandRows& rows,
                                  const SensitivityBudget& budget,
                                  const BootstrapOptions& options);

struct SensitivityRange {
  double point = 0.0;
  double low = 0.0;
  double high = 0.0;
  // Bootstrap endpoints of the signed quantity (l_test - l_dr_s)/(sigma nu)
  // before folding to magnitudes.
  double signed_low = 0.0;
  double signed_high = 0.0;
  bool paired = false;
};

// Fixed l_test: intersects the bootstrap CI of the DR estimate with l_test.
SensitivityRange infer_sensitivity_range(const EstimandRows& rows,
                                         double l_test,
                                         const BootstrapOptions& options);

// Paired version: rows.target_loss must be filled. Each replicate recomputes
// the test loss on the same resampled target rows as the DR estimate.
SensitivityRange infer_sensitivity_range(const EstimandRows& rows,
                                         const BootstrapOptions& options);

struct BenchmarkInputs {
  LossFamily family = LossFamily::regression();
  Form form = Form::kGlm;
  Matrix long_source;             // n x d_long
  Matrix long_target;             // m x d_long
  std::vector<int> short_columns; // columns of the long features kept
  Matrix source_labels;           // label space, n rows
  // GLM form: natural parameter of the evaluated model on each source row.
  Matrix eta_source;
  // General form: loss of the evaluated model on each source row.
  std::vector<double> source_losses;
  NuisanceConfig config;
};

// Fits proxy long and short nuisances on the nuisance fold and evaluates the
// sensitivity formulas on main-fold source rows. Scalar-outcome families only
// (regression, binary) in GLM form.
SensitivityEstimate benchmark_sensitivity(const BenchmarkInputs& inputs);

// Complement of `omit` within [0, d).
std::vector<int> kept_columns(int d, const std::vector<int>& omit);

}  // namespace ovb

#endif  // OVB_BOUNDS_H_
