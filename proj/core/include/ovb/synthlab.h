#ifndef OVB_SYNTHLAB_H_
#define OVB_SYNTHLAB_H_

// Controlled covariate-shift worlds: small discrete worlds whose estimands
// can be enumerated exactly, and Gaussian worlds with a linear label rule and
// a hidden subset of label-relevant features.

#include <cstdint>
#include <string>
#include <vector>

#include "ovb/dataset.h"
#include "ovb/estimators.h"
#include "ovb/glm.h"

namespace ovb {

// One support point (x, z, y). x is observed, z is omitted.
struct OracleCell {
  double x = 0.0;
  double z = 0.0;
  double y = 0.0;
  double p_source = 0.0;
  double p_target = 0.0;
};

struct OracleWorld {
  std::string name;
  LossFamily family = LossFamily::regression();
  std::vector<OracleCell> cells;
  // Evaluated model: eta(x) = slope * x + bias.
  double slope = 1.0;
  double bias = 0.0;

  double eta(double x) const { return slope * x + bias; }
  // Throws kInvalidArgument on unnormalized probabilities, an overlap
  // violation, or a label rule that differs between P and Q given (x, z).
  void validate() const;
};

// x ~ Bernoulli(0.5) in both domains; z ~ Bernoulli(0.5) under P and
// Bernoulli(0.8) under Q; y = x + z; f(x) = x; regression.
OracleWorld oracle_w1();
// Same (x, z) shift with Pr(y = 1 | x, z) = sigmoid(-1 + x + 1.5 z) and
// f(x) = x - 0.5; binary.
OracleWorld oracle_w2();
// W1 with Q equal to P.
OracleWorld oracle_no_shift();

struct TruthRecord {
  Form form = Form::kGlm;
  double source_loss = 0.0;  // E_P[l]
  double target_loss = 0.0;  // E_Q[l]
  double l_dr_short = 0.0;
  double l_dr_long = 0.0;    // equals target_loss
  double ovb = 0.0;          // l_dr_short - l_dr_long
  double sigma2 = 0.0;
  double nu2 = 0.0;
  double cy = 0.0;
  double cd = 0.0;
  double rho = 0.0;
  double bound = 0.0;        // rho * cy * cd * sigma * nu
  // Per cell, aligned with world.cells.
  std::vector<double> g_long;
  std::vector<double> g_short;
  std::vector<double> w_long;
  std::vector<double> w_short;
  std::vector<double> alpha_long;
  std::vector<double> alpha_short;

  double s() const { return rho * cy * cd; }
};

// Exact population values by summing over cells. General form uses the loss
// as the outcome; GLM form uses the label and alpha = w * eta. Where a ratio
// has a zero denominator (a perfect short model, no shift) the corresponding
// parameter is reported as 0.
TruthRecord enumerate_truth(const OracleWorld& world, Form form);

struct WorldSample {
  ShiftDataset dataset;   // observed x only; target labels included
  Matrix long_source;     // (x, z)
  Matrix long_target;
  std::vector<std::size_t> source_cells;
  std::vector<std::size_t> target_cells;
};

// i.i.d. draws of n source and m target cells.
WorldSample sample_world(const OracleWorld& world, Index n, Index m,
                         std::uint64_t seed);

// Gaussian family. Features 0..k-1 carry the label; omitted ones are hidden
// from the model. x ~ N(0, I) under P and N(shift, I) under Q.
struct SynthConfig {
  int d = 10;
  int k = 10;
  std::vector<double> coefficients;  // k entries
  std::vector<int> omit;             // subset of [0, k)
  std::vector<double> shift;         // d entries
  double noise_sd = 0.5;
  Index n = 1000;
  Index m = 1000;
  std::uint64_t seed = 0;

  void validate() const;
  std::vector<int> observed_columns() const;
};

struct GaussianSample {
  ShiftDataset dataset;  // observed columns only; target labels included
  Matrix long_source;    // all d columns
  Matrix long_target;
  std::vector<int> observed;
};

GaussianSample sample_gaussian(const SynthConfig& config);

// Fresh labeled target-domain draws (long features, labels) from substream
// `stream`, for held-out test losses.
struct LabeledDraw {
  Matrix features;
  Matrix labels;
};
LabeledDraw sample_gaussian_target(const SynthConfig& config, Index rows,
                                   std::uint64_t stream);

// dQ/dP = exp(mu'x - |mu|^2 / 2), over all columns or a subset.
double true_density_ratio(const SynthConfig& config,
                          std::span<const double> x_long);
double true_density_ratio(const SynthConfig& config,
                          std::span<const double> x_long,
                          std::span<const int> columns);

// Oracle regression nuisances on long-feature rows: E_P[y | x_obs],
// E[y | x], and the short and long density ratios.
struct GaussianOracle {
  std::vector<double> g_long;
  std::vector<double> g_short;
  std::vector<double> w_long;
  std::vector<double> w_short;
};
GaussianOracle gaussian_oracle(const SynthConfig& config,
                               const Matrix& long_features);

// Population sensitivity parameters of the linear model
// eta = weights' x_obs + bias (weights over observed columns), GLM form with
// exact short and long nuisances. Closed form under the Gaussian family:
//   cd^2  = exp(|mu_om|^2) - 1
//   cy^2  = |beta_om|^2 / (|beta_om|^2 + noise_sd^2)
//   rho   = |E_P[w_S eta]| |beta_om' mu_om| /
//           sqrt(|beta_om|^2 E_P[w_S^2 eta^2] cd^2)
// where om indexes omitted columns. Throws when eta is identically zero or
// nothing is omitted; omitted columns with zero coefficients give cy = rho = 0.
struct GaussianTruth {
  double cy = 0.0;
  double cd = 0.0;
  double rho = 0.0;
  double sigma2 = 0.0;  // population label-space fidelity
  double nu2 = 0.0;     // E_P[w_S^2 eta^2]

  double s() const { return rho * cy * cd; }
};
GaussianTruth gaussian_truth(const SynthConfig& config,
                             std::span<const double> weights, double bias);

// Uniform count in {1, ..., k-1} (or exactly `count` when positive), then a
// uniform subset of that size.
std::vector<int> random_omit_mask(int k, std::uint64_t seed, int count = 0);

// Ten N(0, 1) coefficients, noise_sd 0.5, a random omit mask, and a shift of
// +delta * sign(beta) on observed columns and -delta * sign(beta) on omitted
// ones. omit_count > 0 fixes the number of omitted features.
SynthConfig amazon_protocol_config(std::uint64_t seed, Index n, Index m,
                                   double delta, int omit_count = 0);

// Amazon protocol with exactly three omitted features and delta = 0.4: the
// observed features stay predictive while the omitted ones shift against
// them.
SynthConfig strong_omission_config(std::uint64_t seed, Index n, Index m);

}  // namespace ovb

#endif  // OVB_SYNTHLAB_H_
