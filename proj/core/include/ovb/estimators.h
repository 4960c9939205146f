#ifndef OVB_ESTIMATORS_H_
#define OVB_ESTIMATORS_H_

// Point estimators of target-domain loss from labeled source rows and
// unlabeled target rows, plus the data-identifiable bound ingredients
// (fidelity sigma^2 and overlap nu^2). Everything here operates on main-fold
// rows; nuisance predictions are supplied by the caller.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ovb/dataset.h"
#include "ovb/glm.h"

namespace ovb {

// general: g predicts the loss itself; glm: g predicts the label and the
// f-dependence moves into the Riesz representer alpha = w * eta.
enum class Form { kGeneral, kGlm };

std::string form_name(Form form);
Form form_from_name(const std::string& name);

double unadjusted_loss(std::span<const double> losses);
double ipw_loss(std::span<const double> losses,
                std::span<const double> weights);
// mean_P[w (l - g)] + mean_Q[g]
double dr_general(std::span<const double> losses_p,
                  std::span<const double> g_p,
                  std::span<const double> weights,
                  std::span<const double> g_q);
// mean_Q[b(eta) - <eta, g>] - mean_P[w <eta, y - g>]. g lives in label space;
// for probability-valued families each entry must lie in [0, 1] and each step
// row must sum to at most 1 + 1e-6. Empty steps spans mean "all steps".
double dr_glm(const LossFamily& family, const Matrix& eta_p,
              const Matrix& eta_q, const Matrix& y_p, const Matrix& g_p,
              const Matrix& g_q, std::span<const double> weights,
              std::span<const int> steps_p = {},
              std::span<const int> steps_q = {});

// Mean squared residual; multi-column rows use the squared Euclidean norm.
double fidelity(std::span<const double> targets,
                std::span<const double> predictions);
double fidelity(const Matrix& targets, const Matrix& predictions);

// Mean of squared Riesz-representer values over source rows.
double overlap(std::span<const double> alphas);

// 2 mean_Q[alpha-term] - mean_P[alpha^2]: an unbiased-in-expectation second
// moment estimate that can go negative when overlap is poor.
double overlap_loss_based(std::span<const double> target_terms,
                          std::span<const double> source_alpha_sq);

struct EvalReport {
  Form form = Form::kGlm;
  double unadjusted = 0.0;
  double ipw = 0.0;
  double dr = 0.0;
  double sigma2 = 0.0;
  double nu2 = 0.0;
  double nu2_loss_based = 0.0;
  Index n_main = 0;
  Index m_main = 0;
  // True target loss on labeled main-fold target rows, when available.
  std::optional<double> test_loss;

  double sigma() const;
  double nu() const;
};

// Per-row contributions whose means make up every estimate. Resampling these
// rows is all the bootstrap needs (nuisances held fixed).
struct EstimandRows {
  Form form = Form::kGlm;
  // source (P) rows
  std::vector<double> source_loss;    // l_i
  std::vector<double> source_weight;  // w_i
  std::vector<double> dr_source;      // DR correction term
  std::vector<double> residual_sq;    // (target - g)^2
  std::vector<double> alpha_sq;       // alpha_i^2
  // target (Q) rows
  std::vector<double> dr_target;      // g (general) or b - <eta, g> (glm)
  std::vector<double> target_alpha;   // w (general) or w |eta|^2 (glm)
  std::vector<double> target_loss;    // empty unless target labels known

  std::size_t n() const { return source_loss.size(); }
  std::size_t m() const { return dr_target.size(); }
  EvalReport report() const;
};

EstimandRows general_rows(std::span<const double> losses_p,
                          std::span<const double> g_p,
                          std::span<const double> w_p,
                          std::span<const double> g_q,
                          std::span<const double> w_q,
                          std::span<const double> target_losses = {});

EstimandRows glm_rows(const LossFamily& family, const Matrix& eta_p,
                      const Matrix& eta_q, const Matrix& y_p,
                      const Matrix& g_p, const Matrix& g_q,
                      std::span<const double> w_p,
                      std::span<const double> w_q,
                      const Matrix* y_q = nullptr);

// Checks that label-space predictions are valid for `family`.
void validate_label_predictions(const LossFamily& family, const Matrix& g,
                                const char* what);

}  // namespace ovb

#endif  // OVB_ESTIMATORS_H_
