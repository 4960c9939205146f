#ifndef OVB_TESTS_RANDOM_PROBLEM_H_
#define OVB_TESTS_RANDOM_PROBLEM_H_

// Random well-formed GLM problems and models for gradient checks.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "ovb/glm.h"
#include "ovb/numeric.h"
#include "ovb/robust_opt.h"

namespace ovb::testing {

inline void random_label_row(const LossFamily& fam, std::mt19937_64& rng,
                             std::span<double> out, int steps) {
  std::normal_distribution<double> normal;
  std::fill(out.begin(), out.end(), 0.0);
  if (fam.task() == Task::kRegression) {
    out[0] = normal(rng);
    return;
  }
  if (fam.task() == Task::kBinary) {
    out[0] = static_cast<double>(rng() & 1u);
    return;
  }
  std::uniform_int_distribution<int> cls(0, fam.classes() - 1);
  for (int t = 0; t < steps; ++t) out[t * fam.classes() + cls(rng)] = 1.0;
}

// Label-space prediction: a mean parameter of random natural parameters, so
// probability families stay valid.
inline void random_g_row(const LossFamily& fam, std::mt19937_64& rng,
                         std::span<double> out, int steps) {
  std::normal_distribution<double> normal;
  std::vector<double> eta(out.size());
  for (auto& v : eta) v = normal(rng);
  mean_param_into(fam, eta, out, steps);
}

inline GlmProblem random_problem(const LossFamily& fam, Index d, Index n,
                                 Index m, std::uint64_t seed) {
  auto rng = make_engine(seed, 77);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> weight(0.2, 3.0);
  std::uniform_int_distribution<int> step(1, fam.max_steps());
  const bool seq = fam.task() == Task::kSeqGen;
  GlmProblem p;
  p.family = fam;
  p.source_features = Matrix(n, d);
  p.target_features = Matrix(m, d);
  for (Index i = 0; i < n * d; ++i) p.source_features.data()[i] = normal(rng);
  for (Index i = 0; i < m * d; ++i) p.target_features.data()[i] = normal(rng);
  p.source_labels = Matrix(n, fam.width());
  p.source_g = Matrix(n, fam.width());
  p.target_g = Matrix(m, fam.width());
  p.source_w = Vector(n);
  p.target_w = Vector(m);
  for (Index i = 0; i < n; ++i) {
    const int t = seq ? step(rng) : kAllSteps;
    if (seq) p.source_steps.push_back(t);
    random_label_row(fam, rng, row_span(p.source_labels, i), fam.active_steps(t));
    random_g_row(fam, rng, row_span(p.source_g, i), t);
    p.source_w(i) = weight(rng);
  }
  for (Index j = 0; j < m; ++j) {
    const int t = seq ? step(rng) : kAllSteps;
    if (seq) p.target_steps.push_back(t);
    random_g_row(fam, rng, row_span(p.target_g, j), t);
    p.target_w(j) = weight(rng);
  }
  return p;
}

inline LinearModel random_model(const LossFamily& fam, Index d,
                                 std::uint64_t seed) {
  auto rng = make_engine(seed, 78);
  std::normal_distribution<double> normal(0.0, 0.7);
  LinearModel model = LinearModel::zeros(fam, d);
  Vector theta(model.num_params());
  for (Index k = 0; k < theta.size(); ++k) theta(k) = normal(rng);
  model.set_flat(theta);
  return model;
}

// max_k |analytic_k - fd_k| / max(1, max_k |analytic_k|), central differences.
template <typename F>
double fd_relative_error(const Vector& theta, const Vector& analytic, F&& f,
                         double h = 1e-6) {
  double worst = 0.0;
  const double scale = std::max(1.0, analytic.cwiseAbs().maxCoeff());
  for (Index k = 0; k < theta.size(); ++k) {
    Vector up = theta, dn = theta;
    up(k) += h;
    dn(k) -= h;
    const double fd = (f(up) - f(dn)) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - analytic(k)) / scale);
  }
  return worst;
}

}  // namespace ovb::testing

#endif  // OVB_TESTS_RANDOM_PROBLEM_H_
