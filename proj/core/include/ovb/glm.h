#ifndef OVB_GLM_H_
#define OVB_GLM_H_

// Canonical-link GLM negative log-likelihoods, written in natural-parameter
// form: loss(y, eta) = -(<y, eta> - b(eta)), with the base-measure term c(y)
// dropped. For regression this means the loss is half the squared error minus
// y^2 / 2, so only loss differences match the textbook value.
//
// Per-sample natural parameters and labels are flat spans:
//   regression, binary   width 1
//   multiclass(K)        width K, one-hot labels
//   seqgen(K, T)         width T*K, row-major (step t occupies [t*K, t*K+K)),
//                        with an explicit realized length `steps` in [1, T];
//                        rows at or beyond `steps` are masked out.

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ovb {

enum class Task { kRegression, kBinary, kMulticlass, kSeqGen };

inline constexpr int kAllSteps = -1;

class LossFamily {
 public:
  static LossFamily regression() { return LossFamily(Task::kRegression, 1, 1); }
  static LossFamily binary() { return LossFamily(Task::kBinary, 1, 1); }
  static LossFamily multiclass(int classes);
  static LossFamily seqgen(int vocab, int max_steps);
  // Accepts "regression", "binary", "multiclass", "seqgen".
  static LossFamily from_name(std::string_view name, int classes = 2,
                              int max_steps = 1);

  Task task() const { return task_; }
  int classes() const { return classes_; }
  int max_steps() const { return max_steps_; }
  // Entries per step (K for multiclass/seqgen, else 1).
  int step_width() const { return classes_; }
  // Entries per sample.
  int width() const { return classes_ * max_steps_; }
  bool is_probability_valued() const { return task_ != Task::kRegression; }
  std::string name() const;

  // Number of unmasked steps for a requested `steps` (kAllSteps = all).
  int active_steps(int steps) const;

  friend bool operator==(const LossFamily&, const LossFamily&) = default;

 private:
  LossFamily(Task task, int classes, int max_steps)
      : task_(task), classes_(classes), max_steps_(max_steps) {}

  Task task_;
  int classes_;
  int max_steps_;
};

// log(1 + exp(x)) without overflow.
double log1p_exp(double x);
double sigmoid(double x);
// Max-shifted log-sum-exp; returns -inf for an empty span.
double log_sum_exp(std::span<const double> v);

// b(eta). Throws kShape on width mismatch.
double log_partition(const LossFamily& family, std::span<const double> eta,
                     int steps = kAllSteps);

// Gradient of b: identity, sigmoid or per-step softmax. Masked steps are 0.
std::vector<double> mean_param(const LossFamily& family,
                               std::span<const double> eta,
                               int steps = kAllSteps);
void mean_param_into(const LossFamily& family, std::span<const double> eta,
                     std::span<double> out, int steps = kAllSteps);

// -(<y, eta> - b(eta)) over unmasked steps.
double nll(const LossFamily& family, std::span<const double> eta,
           std::span<const double> y, int steps = kAllSteps);

// d nll / d eta = mean_param(eta) - y (zero on masked steps).
std::vector<double> grad_nll_eta(const LossFamily& family,
                                 std::span<const double> eta,
                                 std::span<const double> y,
                                 int steps = kAllSteps);

// Checks label conventions: binary in {0,1}; one-hot rows with entries in
// {0,1} summing to exactly 1. Throws kData.
void validate_label(const LossFamily& family, std::span<const double> y,
                    int steps = kAllSteps);

}  // namespace ovb

#endif  // OVB_GLM_H_
