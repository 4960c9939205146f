#include "ovb/glm.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ovb/error.h"

namespace ovb {
namespace {

void check_width(const LossFamily& family, std::size_t n, const char* what) {
  if (n != static_cast<std::size_t>(family.width())) {
    fail(ErrorKind::kShape, std::string(what) + ": expected width " +
                                std::to_string(family.width()) + " for " +
                                family.name() + ", got " + std::to_string(n));
  }
}

}  // namespace

LossFamily LossFamily::multiclass(int classes) {
  require(classes >= 2, ErrorKind::kInvalidArgument,
          "multiclass family needs K >= 2");
  return LossFamily(Task::kMulticlass, classes, 1);
}

LossFamily LossFamily::seqgen(int vocab, int max_steps) {
  require(vocab >= 2, ErrorKind::kInvalidArgument,
          "seqgen family needs vocabulary K >= 2");
  require(max_steps >= 1, ErrorKind::kInvalidArgument,
          "seqgen family needs T >= 1");
  return LossFamily(Task::kSeqGen, vocab, max_steps);
}

LossFamily LossFamily::from_name(std::string_view name, int classes,
                                 int max_steps) {
  if (name == "regression") return regression();
  if (name == "binary") return binary();
  if (name == "multiclass") return multiclass(classes);
  if (name == "seqgen") return seqgen(classes, max_steps);
  fail(ErrorKind::kInvalidArgument,
       "unknown task family '" + std::string(name) + "'");
}

std::string LossFamily::name() const {
  switch (task_) {
    case Task::kRegression: return "regression";
    case Task::kBinary: return "binary";
    case Task::kMulticlass: return "multiclass";
    case Task::kSeqGen: return "seqgen";
  }
  return "unknown";
}

int LossFamily::active_steps(int steps) const {
  if (steps == kAllSteps) return max_steps_;
  require(steps >= 1 && steps <= max_steps_, ErrorKind::kShape,
          "sequence length " + std::to_string(steps) + " outside [1, " +
              std::to_string(max_steps_) + "]");
  return steps;
}

double log1p_exp(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

double log_partition(const LossFamily& family, std::span<const double> eta,
                     int steps) {
  check_width(family, eta.size(), "log_partition");
  switch (family.task()) {
    case Task::kRegression:
      return 0.5 * eta[0] * eta[0];
    case Task::kBinary:
      return log1p_exp(eta[0]);
    case Task::kMulticlass:
      return log_sum_exp(eta);
    case Task::kSeqGen: {
      const int k = family.step_width();
      const int t_active = family.active_steps(steps);
      double total = 0.0;
      for (int t = 0; t < t_active; ++t) {
        total += log_sum_exp(eta.subspan(static_cast<std::size_t>(t * k), k));
      }
      return total;
    }
  }
  return 0.0;
}

void mean_param_into(const LossFamily& family, std::span<const double> eta,
                     std::span<double> out, int steps) {
  check_width(family, eta.size(), "mean_param");
  check_width(family, out.size(), "mean_param output");
  switch (family.task()) {
    case Task::kRegression:
      out[0] = eta[0];
      return;
    case Task::kBinary:
      out[0] = sigmoid(eta[0]);
      return;
    case Task::kMulticlass:
    case Task::kSeqGen: {
      const int k = family.step_width();
      const int t_active = family.active_steps(steps);
      std::fill(out.begin(), out.end(), 0.0);
      for (int t = 0; t < t_active; ++t) {
        const auto row = eta.subspan(static_cast<std::size_t>(t * k), k);
        const double lse = log_sum_exp(row);
        for (int j = 0; j < k; ++j) out[t * k + j] = std::exp(row[j] - lse);
      }
      return;
    }
  }
}

std::vector<double> mean_param(const LossFamily& family,
                               std::span<const double> eta, int steps) {
  std::vector<double> out(eta.size());
  mean_param_into(family, eta, out, steps);
  return out;
}

double nll(const LossFamily& family, std::span<const double> eta,
           std::span<const double> y, int steps) {
  check_width(family, eta.size(), "nll eta");
  check_width(family, y.size(), "nll label");
  validate_label(family, y, steps);
  const int used =
      family.step_width() * family.active_steps(steps);
  double dot = 0.0;
  for (int i = 0; i < used; ++i) dot += y[i] * eta[i];
  return -(dot - log_partition(family, eta, steps));
}

std::vector<double> grad_nll_eta(const LossFamily& family,
                                 std::span<const double> eta,
                                 std::span<const double> y, int steps) {
  check_width(family, y.size(), "grad_nll_eta label");
  std::vector<double> g = mean_param(family, eta, steps);
  const int used = family.step_width() * family.active_steps(steps);
  for (int i = 0; i < used; ++i) g[i] -= y[i];
  return g;
}

void validate_label(const LossFamily& family, std::span<const double> y,
                    int steps) {
  check_width(family, y.size(), "label");
  switch (family.task()) {
    case Task::kRegression:
      require(std::isfinite(y[0]), ErrorKind::kData,
              "regression label is not finite");
      return;
    case Task::kBinary:
      require(y[0] == 0.0 || y[0] == 1.0, ErrorKind::kData,
              "binary label must be 0 or 1");
      return;
    case Task::kMulticlass:
    case Task::kSeqGen: {
      const int k = family.step_width();
      const int t_active = family.active_steps(steps);
      for (int t = 0; t < t_active; ++t) {
        double total = 0.0;
        for (int j = 0; j < k; ++j) {
          const double v = y[t * k + j];
          require(v == 0.0 || v == 1.0, ErrorKind::kData,
                  "one-hot label entries must be 0 or 1");
          total += v;
        }
        require(total == 1.0, ErrorKind::kData,
                "one-hot label row must sum to exactly 1");
      }
      return;
    }
  }
}

}  // namespace ovb
