#include "ovb/estimators.h"

#include <cmath>

#include "ovb/error.h"
#include "ovb/numeric.h"

namespace ovb {
namespace {

void same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    fail(ErrorKind::kShape, std::string(what) + ": length mismatch (" +
                                std::to_string(a) + " vs " +
                                std::to_string(b) + ")");
  }
}

void positive_weights(std::span<const double> w, const char* what) {
  for (double v : w) {
    require(v > 0.0 && std::isfinite(v), ErrorKind::kInvalidArgument,
            std::string(what) + ": weights must be positive and finite");
  }
}

int steps_at(std::span<const int> steps, Index i) {
  return steps.empty() ? kAllSteps : steps[static_cast<std::size_t>(i)];
}

// <a, b> over the unmasked entries of a sample.
double masked_dot(const LossFamily& family, std::span<const double> a,
                  std::span<const double> b, int steps) {
  const int used = family.step_width() * family.active_steps(steps);
  double s = 0.0;
  for (int k = 0; k < used; ++k) s += a[k] * b[k];
  return s;
}

void check_glm_shapes(const LossFamily& family, const Matrix& eta_p,
                      const Matrix& eta_q, const Matrix& y_p,
                      const Matrix& g_p, const Matrix& g_q,
                      std::size_t n_weights) {
  const Index w = family.width();
  require(eta_p.cols() == w && eta_q.cols() == w && y_p.cols() == w &&
              g_p.cols() == w && g_q.cols() == w,
          ErrorKind::kShape, "dr_glm: column count does not match family");
  require(eta_p.rows() == y_p.rows() && eta_p.rows() == g_p.rows() &&
              static_cast<std::size_t>(eta_p.rows()) == n_weights,
          ErrorKind::kShape, "dr_glm: source row counts differ");
  require(eta_q.rows() == g_q.rows(), ErrorKind::kShape,
          "dr_glm: target row counts differ");
  require(eta_p.rows() >= 1 && eta_q.rows() >= 1, ErrorKind::kInvalidArgument,
          "dr_glm: empty input");
}

}  // namespace

std::string form_name(Form form) {
  return form == Form::kGeneral ? "general" : "glm";
}

Form form_from_name(const std::string& name) {
  if (name == "general") return Form::kGeneral;
  if (name == "glm") return Form::kGlm;
  fail(ErrorKind::kInvalidArgument, "unknown form '" + name + "'");
}

double unadjusted_loss(std::span<const double> losses) {
  require(!losses.empty(), ErrorKind::kInvalidArgument,
          "unadjusted_loss: empty input");
  return mean(losses);
}

double ipw_loss(std::span<const double> losses,
                std::span<const double> weights) {
  same_length(losses.size(), weights.size(), "ipw_loss");
  require(!losses.empty(), ErrorKind::kInvalidArgument, "ipw_loss: empty input");
  positive_weights(weights, "ipw_loss");
  std::vector<double> terms(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i) {
    terms[i] = weights[i] * losses[i];
  }
  return mean(terms);
}

double dr_general(std::span<const double> losses_p,
                  std::span<const double> g_p,
                  std::span<const double> weights,
                  std::span<const double> g_q) {
  same_length(losses_p.size(), g_p.size(), "dr_general");
  same_length(losses_p.size(), weights.size(), "dr_general");
  require(!losses_p.empty() && !g_q.empty(), ErrorKind::kInvalidArgument,
          "dr_general: empty input");
  positive_weights(weights, "dr_general");
  std::vector<double> terms(losses_p.size());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    terms[i] = weights[i] * (losses_p[i] - g_p[i]);
  }
  return mean(terms) + mean(g_q);
}

void validate_label_predictions(const LossFamily& family, const Matrix& g,
                                const char* what) {
  require(g.allFinite(), ErrorKind::kInvalidArgument,
          std::string(what) + ": non-finite outcome prediction");
  if (!family.is_probability_valued()) return;
  const int k = family.step_width();
  for (Index i = 0; i < g.rows(); ++i) {
    for (int t = 0; t < family.max_steps(); ++t) {
      double total = 0.0;
      for (int j = 0; j < k; ++j) {
        const double v = g(i, t * k + j);
        require(v >= 0.0 && v <= 1.0, ErrorKind::kInvalidArgument,
                std::string(what) +
                    ": label-space prediction outside [0, 1]");
        total += v;
      }
      require(family.task() == Task::kBinary || total <= 1.0 + 1e-6,
              ErrorKind::kInvalidArgument,
              std::string(what) + ": class probabilities sum above 1");
    }
  }
}

double dr_glm(const LossFamily& family, const Matrix& eta_p,
              const Matrix& eta_q, const Matrix& y_p, const Matrix& g_p,
              const Matrix& g_q, std::span<const double> weights,
              std::span<const int> steps_p, std::span<const int> steps_q) {
  check_glm_shapes(family, eta_p, eta_q, y_p, g_p, g_q, weights.size());
  positive_weights(weights, "dr_glm");
  validate_label_predictions(family, g_p, "dr_glm g_P");
  validate_label_predictions(family, g_q, "dr_glm g_Q");
  std::vector<double> target(static_cast<std::size_t>(eta_q.rows()));
  for (Index j = 0; j < eta_q.rows(); ++j) {
    const int st = steps_at(steps_q, j);
    target[j] = log_partition(family, row_span(eta_q, j), st) -
                masked_dot(family, row_span(eta_q, j), row_span(g_q, j), st);
  }
  std::vector<double> source(static_cast<std::size_t>(eta_p.rows()));
  std::vector<double> resid(static_cast<std::size_t>(family.width()));
  for (Index i = 0; i < eta_p.rows(); ++i) {
    for (Index k = 0; k < family.width(); ++k) resid[k] = y_p(i, k) - g_p(i, k);
    source[i] = weights[i] * masked_dot(family, row_span(eta_p, i), resid,
                                        steps_at(steps_p, i));
  }
  return mean(target) - mean(source);
}

double fidelity(std::span<const double> targets,
                std::span<const double> predictions) {
  same_length(targets.size(), predictions.size(), "fidelity");
  require(!targets.empty(), ErrorKind::kInvalidArgument, "fidelity: empty input");
  std::vector<double> sq(targets.size());
  for (std::size_t i = 0; i < sq.size(); ++i) {
    const double r = targets[i] - predictions[i];
    sq[i] = r * r;
  }
  return mean(sq);
}

double fidelity(const Matrix& targets, const Matrix& predictions) {
  require(targets.rows() == predictions.rows() &&
              targets.cols() == predictions.cols(),
          ErrorKind::kShape, "fidelity: shape mismatch");
  require(targets.rows() > 0, ErrorKind::kInvalidArgument,
          "fidelity: empty input");
  std::vector<double> sq(static_cast<std::size_t>(targets.rows()));
  for (Index i = 0; i < targets.rows(); ++i) {
    sq[i] = (targets.row(i) - predictions.row(i)).squaredNorm();
  }
  return mean(sq);
}

double overlap(std::span<const double> alphas) {
  require(!alphas.empty(), ErrorKind::kInvalidArgument, "overlap: empty input");
  std::vector<double> sq(alphas.size());
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = alphas[i] * alphas[i];
  return mean(sq);
}

double overlap_loss_based(std::span<const double> target_terms,
                          std::span<const double> source_alpha_sq) {
  return 2.0 * mean(target_terms) - mean(source_alpha_sq);
}

double EvalReport::sigma() const { return std::sqrt(sigma2); }
double EvalReport::nu() const { return std::sqrt(nu2); }

EvalReport EstimandRows::report() const {
  EvalReport r;
  r.form = form;
  r.n_main = static_cast<Index>(n());
  r.m_main = static_cast<Index>(m());
  r.unadjusted = mean(source_loss);
  std::vector<double> weighted(n());
  for (std::size_t i = 0; i < n(); ++i) {
    weighted[i] = source_weight[i] * source_loss[i];
  }
  r.ipw = mean(weighted);
  r.dr = mean(dr_source) + mean(dr_target);
  r.sigma2 = mean(residual_sq);
  r.nu2 = mean(alpha_sq);
  r.nu2_loss_based = overlap_loss_based(target_alpha, alpha_sq);
  if (!target_loss.empty()) r.test_loss = mean(target_loss);
  return r;
}

EstimandRows general_rows(std::span<const double> losses_p,
                          std::span<const double> g_p,
                          std::span<const double> w_p,
                          std::span<const double> g_q,
                          std::span<const double> w_q,
                          std::span<const double> target_losses) {
  same_length(losses_p.size(), g_p.size(), "general_rows");
  same_length(losses_p.size(), w_p.size(), "general_rows");
  same_length(g_q.size(), w_q.size(), "general_rows");
  require(target_losses.empty() || target_losses.size() == g_q.size(),
          ErrorKind::kShape, "general_rows: target loss count mismatch");
  require(!losses_p.empty() && !g_q.empty(), ErrorKind::kInvalidArgument,
          "general_rows: empty input");
  positive_weights(w_p, "general_rows");
  EstimandRows rows;
  rows.form = Form::kGeneral;
  rows.source_loss.assign(losses_p.begin(), losses_p.end());
  rows.source_weight.assign(w_p.begin(), w_p.end());
  for (std::size_t i = 0; i < losses_p.size(); ++i) {
    const double r = losses_p[i] - g_p[i];
    rows.dr_source.push_back(w_p[i] * r);
    rows.residual_sq.push_back(r * r);
    rows.alpha_sq.push_back(w_p[i] * w_p[i]);
  }
  rows.dr_target.assign(g_q.begin(), g_q.end());
  rows.target_alpha.assign(w_q.begin(), w_q.end());
  rows.target_loss.assign(target_losses.begin(), target_losses.end());
  return rows;
}

EstimandRows glm_rows(const LossFamily& family, const Matrix& eta_p,
                      const Matrix& eta_q, const Matrix& y_p,
                      const Matrix& g_p, const Matrix& g_q,
                      std::span<const double> w_p,
                      std::span<const double> w_q, const Matrix* y_q) {
  check_glm_shapes(family, eta_p, eta_q, y_p, g_p, g_q, w_p.size());
  require(static_cast<std::size_t>(eta_q.rows()) == w_q.size(),
          ErrorKind::kShape, "glm_rows: target weight count mismatch");
  require(y_q == nullptr || (y_q->rows() == eta_q.rows() &&
                             y_q->cols() == family.width()),
          ErrorKind::kShape, "glm_rows: target label shape mismatch");
  positive_weights(w_p, "glm_rows");
  validate_label_predictions(family, g_p, "glm_rows g_P");
  validate_label_predictions(family, g_q, "glm_rows g_Q");
  EstimandRows rows;
  rows.form = Form::kGlm;
  const auto n = static_cast<std::size_t>(eta_p.rows());
  const auto m = static_cast<std::size_t>(eta_q.rows());
  std::vector<double> resid(static_cast<std::size_t>(family.width()));
  for (std::size_t i = 0; i < n; ++i) {
    const auto eta = row_span(eta_p, static_cast<Index>(i));
    for (Index k = 0; k < family.width(); ++k) {
      resid[k] = y_p(static_cast<Index>(i), k) - g_p(static_cast<Index>(i), k);
    }
    double rss = 0.0;
    for (double r : resid) rss += r * r;
    double eta_sq = 0.0;
    for (double e : eta) eta_sq += e * e;
    rows.source_loss.push_back(
        nll(family, eta, row_span(y_p, static_cast<Index>(i))));
    rows.source_weight.push_back(w_p[i]);
    rows.dr_source.push_back(-w_p[i] * masked_dot(family, eta, resid,
                                                  kAllSteps));
    rows.residual_sq.push_back(rss);
    rows.alpha_sq.push_back(w_p[i] * w_p[i] * eta_sq);
  }
  for (std::size_t j = 0; j < m; ++j) {
    const auto eta = row_span(eta_q, static_cast<Index>(j));
    double eta_sq = 0.0;
    for (double e : eta) eta_sq += e * e;
    rows.dr_target.push_back(
        log_partition(family, eta) -
        masked_dot(family, eta, row_span(g_q, static_cast<Index>(j)),
                   kAllSteps));
    rows.target_alpha.push_back(w_q[j] * eta_sq);
    if (y_q != nullptr) {
      rows.target_loss.push_back(
          nll(family, eta, row_span(*y_q, static_cast<Index>(j))));
    }
  }
  return rows;
}

}  // namespace ovb
