#include "ovb/robust_opt.h"

#include <algorithm>
#include <cmath>
#include <deque>

#include "ovb/error.h"
#include "ovb/numeric.h"

namespace ovb {
namespace {

int steps_of(const std::vector<int>& steps, Index i) {
  return steps.empty() ? kAllSteps : steps[static_cast<std::size_t>(i)];
}

int used_entries(const LossFamily& family, int steps) {
  return family.step_width() * family.active_steps(steps);
}

double masked_sq_norm(std::span<const double> v, int used) {
  double s = 0.0;
  for (int k = 0; k < used; ++k) s += v[k] * v[k];
  return s;
}

// Gradient with respect to eta rows, pushed through eta = X W + b.
Vector chain_to_params(const Matrix& xp, const Matrix& gp, const Matrix& xq,
                       const Matrix& gq) {
  const Index d = xp.cols();
  const Index w = gp.cols();
  Matrix gw = xp.transpose() * gp;
  Vector gb = gp.colwise().sum().transpose();
  if (gq.rows() > 0) {
    gw.noalias() += xq.transpose() * gq;
    gb += gq.colwise().sum().transpose();
  }
  Vector out(d * w + w);
  for (Index r = 0; r < d; ++r) {
    for (Index c = 0; c < w; ++c) out(r * w + c) = gw(r, c);
  }
  out.tail(w) = gb;
  return out;
}

void check_finite(const Vector& v, const char* what) {
  require(v.allFinite(), ErrorKind::kNumerical,
          std::string(what) + ": non-finite gradient");
}

double nu2_of(const GlmProblem& problem, const Matrix& eta_p) {
  std::vector<double> terms(static_cast<std::size_t>(problem.n()));
  for (Index i = 0; i < problem.n(); ++i) {
    const double w = problem.source_w(i);
    terms[i] = w * w *
               masked_sq_norm(row_span(eta_p, i),
                              used_entries(problem.family,
                                           steps_of(problem.source_steps, i)));
  }
  return mean(terms);
}

}  // namespace

LinearModel LinearModel::zeros(const LossFamily& family, Index d) {
  require(d >= 1, ErrorKind::kInvalidArgument,
          "linear model needs at least one feature");
  LinearModel m;
  m.family = family;
  m.weights = Matrix::Zero(d, family.width());
  m.bias = Vector::Zero(family.width());
  return m;
}

Matrix LinearModel::eta(const Matrix& features) const {
  require(features.cols() == weights.rows(), ErrorKind::kShape,
          "linear model: feature dimension mismatch");
  Matrix out = features * weights;
  out.rowwise() += bias.transpose();
  return out;
}

Vector LinearModel::flat() const {
  Vector theta(num_params());
  const Index w = weights.cols();
  for (Index r = 0; r < weights.rows(); ++r) {
    for (Index c = 0; c < w; ++c) theta(r * w + c) = weights(r, c);
  }
  theta.tail(bias.size()) = bias;
  return theta;
}

void LinearModel::set_flat(const Vector& theta) {
  require(theta.size() == num_params(), ErrorKind::kShape,
          "linear model: parameter count mismatch");
  const Index w = weights.cols();
  for (Index r = 0; r < weights.rows(); ++r) {
    for (Index c = 0; c < w; ++c) weights(r, c) = theta(r * w + c);
  }
  bias = theta.tail(bias.size());
}

double GlmProblem::sigma2() const { return fidelity(source_labels, source_g); }

void GlmProblem::validate() const {
  const Index w = family.width();
  require(n() >= 1 && m() >= 1, ErrorKind::kInvalidArgument,
          "problem: empty source or target fold");
  require(target_features.cols() == d(), ErrorKind::kShape,
          "problem: source/target feature dimensions differ");
  require(source_labels.rows() == n() && source_labels.cols() == w &&
              source_g.rows() == n() && source_g.cols() == w &&
              source_w.size() == n(),
          ErrorKind::kShape, "problem: source shapes inconsistent");
  require(target_g.rows() == m() && target_g.cols() == w &&
              target_w.size() == m(),
          ErrorKind::kShape, "problem: target shapes inconsistent");
  require(source_steps.empty() ||
              static_cast<Index>(source_steps.size()) == n(),
          ErrorKind::kShape, "problem: source step count mismatch");
  require(target_steps.empty() ||
              static_cast<Index>(target_steps.size()) == m(),
          ErrorKind::kShape, "problem: target step count mismatch");
  require(!target_labels ||
              (target_labels->rows() == m() && target_labels->cols() == w),
          ErrorKind::kShape, "problem: target label shape mismatch");
}

GlmProblem make_glm_problem(const ShiftDataset& dataset,
                            const LossFamily& family,
                            const NuisanceSet& nuisances) {
  require(nuisances.outcome.mode == TargetMode::kPredictsLabel,
          ErrorKind::kInvalidArgument,
          "GLM objective needs an outcome model that predicts labels");
  const FoldPlan& folds = nuisances.folds;
  GlmProblem p;
  p.family = family;
  p.source_features = select_rows(dataset.source_features, folds.main_source);
  p.source_labels = select_rows(dataset.source_labels, folds.main_source);
  p.target_features = select_rows(dataset.target_features, folds.main_target);
  p.source_g = nuisances.outcome.predict(p.source_features);
  p.target_g = nuisances.outcome.predict(p.target_features);
  p.source_w = nuisances.ratio.predict(p.source_features).weights;
  p.target_w = nuisances.ratio.predict(p.target_features).weights;
  if (dataset.target_labels) {
    p.target_labels = select_rows(*dataset.target_labels, folds.main_target);
  }
  p.validate();
  return p;
}

std::string objective_name(Objective objective) {
  switch (objective) {
    case Objective::kUnadjusted: return "unadjusted";
    case Objective::kDr: return "dr";
    case Objective::kWorstCase: return "worst_case";
  }
  return "unknown";
}

Objective objective_from_name(const std::string& name) {
  if (name == "unadjusted") return Objective::kUnadjusted;
  if (name == "dr") return Objective::kDr;
  if (name == "worst_case") return Objective::kWorstCase;
  fail(ErrorKind::kInvalidArgument, "unknown objective '" + name +
                                        "' (expected unadjusted, dr or "
                                        "worst_case)");
}

std::string method_name(Method method) {
  return method == Method::kLbfgs ? "lbfgs" : "gd";
}

Method method_from_name(const std::string& name) {
  if (name == "lbfgs") return Method::kLbfgs;
  if (name == "gd") return Method::kGradientDescent;
  fail(ErrorKind::kInvalidArgument,
       "unknown method '" + name + "' (expected lbfgs or gd)");
}

void OptConfig::validate() const {
  require(step_size > 0.0 && std::isfinite(step_size),
          ErrorKind::kInvalidArgument, "step_size must be positive");
  require(grad_tol > 0.0, ErrorKind::kInvalidArgument,
          "grad_tol must be positive");
  require(max_iters >= 0, ErrorKind::kInvalidArgument,
          "max_iters must be non-negative");
  require(s >= 0.0 && std::isfinite(s), ErrorKind::kInvalidArgument,
          "sensitivity budget s must be finite and non-negative");
  require(lbfgs_memory >= 1, ErrorKind::kInvalidArgument,
          "lbfgs_memory must be at least 1");
}

std::string status_name(OptStatus status) {
  return status == OptStatus::kConverged ? "converged" : "max_iters";
}

ObjectiveParts worst_case_parts(const LinearModel& model,
                                const GlmProblem& problem, double s) {
  require(s >= 0.0, ErrorKind::kInvalidArgument,
          "sensitivity budget s must be non-negative");
  require(model.family == problem.family, ErrorKind::kInvalidArgument,
          "model and problem families differ");
  const Matrix eta_p = model.eta(problem.source_features);
  const Matrix eta_q = model.eta(problem.target_features);
  ObjectiveParts parts;
  parts.dr = dr_glm(problem.family, eta_p, eta_q, problem.source_labels,
                    problem.source_g, problem.target_g, as_span(problem.source_w),
                    problem.source_steps, problem.target_steps);
  parts.sigma = std::sqrt(problem.sigma2());
  parts.nu = std::sqrt(nu2_of(problem, eta_p));
  parts.value = s == 0.0 ? parts.dr : parts.dr + s * parts.sigma * parts.nu;
  require(std::isfinite(parts.value), ErrorKind::kNumerical,
          "worst-case objective is not finite");
  return parts;
}

double worst_case_objective(const LinearModel& model,
                            const GlmProblem& problem,
                            const SensitivityBudget& budget) {
  return worst_case_parts(model, problem, budget.s()).value;
}

Vector grad_objective(const LinearModel& model, const GlmProblem& problem,
                      const SensitivityBudget& budget) {
  const double s = budget.s();
  const LossFamily& fam = problem.family;
  const Index n = problem.n();
  const Index m = problem.m();
  const Index w = fam.width();
  const Matrix eta_p = model.eta(problem.source_features);
  const Matrix eta_q = model.eta(problem.target_features);

  double penalty = 0.0;  // s * sigma / nu
  if (s > 0.0) {
    const double nu = std::sqrt(nu2_of(problem, eta_p));
    if (nu > 0.0) penalty = s * std::sqrt(problem.sigma2()) / nu;
  }

  Matrix gp = Matrix::Zero(n, w);
  for (Index i = 0; i < n; ++i) {
    const int used = used_entries(fam, steps_of(problem.source_steps, i));
    const double wi = problem.source_w(i);
    for (int k = 0; k < used; ++k) {
      const double r = problem.source_labels(i, k) - problem.source_g(i, k);
      gp(i, k) = (-wi * r + penalty * wi * wi * eta_p(i, k)) /
                 static_cast<double>(n);
    }
  }
  Matrix gq = Matrix::Zero(m, w);
  for (Index j = 0; j < m; ++j) {
    const int st = steps_of(problem.target_steps, j);
    const int used = used_entries(fam, st);
    mean_param_into(fam, row_span(eta_q, j), row_span(gq, j), st);
    for (int k = 0; k < used; ++k) {
      gq(j, k) = (gq(j, k) - problem.target_g(j, k)) / static_cast<double>(m);
    }
  }
  Vector g = chain_to_params(problem.source_features, gp,
                             problem.target_features, gq);
  check_finite(g, "worst-case objective");
  return g;
}

double unadjusted_objective(const LinearModel& model,
                            const GlmProblem& problem) {
  const Matrix eta_p = model.eta(problem.source_features);
  std::vector<double> losses(static_cast<std::size_t>(problem.n()));
  for (Index i = 0; i < problem.n(); ++i) {
    losses[i] = nll(problem.family, row_span(eta_p, i),
                    row_span(problem.source_labels, i),
                    steps_of(problem.source_steps, i));
  }
  return mean(losses);
}

Vector grad_unadjusted(const LinearModel& model, const GlmProblem& problem) {
  const LossFamily& fam = problem.family;
  const Index n = problem.n();
  const Matrix eta_p = model.eta(problem.source_features);
  Matrix gp = Matrix::Zero(n, fam.width());
  for (Index i = 0; i < n; ++i) {
    const int st = steps_of(problem.source_steps, i);
    mean_param_into(fam, row_span(eta_p, i), row_span(gp, i), st);
    const int used = used_entries(fam, st);
    for (int k = 0; k < used; ++k) {
      gp(i, k) = (gp(i, k) - problem.source_labels(i, k)) /
                 static_cast<double>(n);
    }
  }
  Vector g = chain_to_params(problem.source_features, gp, Matrix(0, 0),
                             Matrix(0, 0));
  check_finite(g, "unadjusted objective");
  return g;
}

ObjectiveParts general_worst_case(const std::vector<double>& source_losses,
                                  const std::vector<double>& source_g,
                                  const std::vector<double>& source_w,
                                  const std::vector<double>& target_g,
                                  TargetMode g_mode, double s) {
  require(g_mode == TargetMode::kPredictsLoss, ErrorKind::kInvalidArgument,
          "general form needs an outcome model that predicts losses");
  require(s >= 0.0, ErrorKind::kInvalidArgument,
          "sensitivity budget s must be non-negative");
  ObjectiveParts parts;
  parts.dr = dr_general(source_losses, source_g, source_w, target_g);
  parts.sigma = std::sqrt(fidelity(source_losses, source_g));
  parts.nu = std::sqrt(overlap(source_w));
  parts.value = s == 0.0 ? parts.dr : parts.dr + s * parts.sigma * parts.nu;
  return parts;
}

namespace {

class Evaluator {
 public:
  Evaluator(const GlmProblem& problem, const OptConfig& config)
      : problem_(problem), config_(config),
        model_(LinearModel::zeros(problem.family, problem.d())) {}

  double value(const Vector& theta) {
    model_.set_flat(theta);
    if (config_.objective == Objective::kUnadjusted) {
      return unadjusted_objective(model_, problem_);
    }
    return worst_case_parts(model_, problem_, budget_s()).value;
  }

  Vector grad(const Vector& theta) {
    model_.set_flat(theta);
    if (config_.objective == Objective::kUnadjusted) {
      return grad_unadjusted(model_, problem_);
    }
    return grad_objective(model_, problem_,
                          SensitivityBudget::from_product(budget_s()));
  }

  LinearModel model_at(const Vector& theta) {
    model_.set_flat(theta);
    return model_;
  }

 private:
  double budget_s() const {
    return config_.objective == Objective::kWorstCase ? config_.s : 0.0;
  }

  const GlmProblem& problem_;
  const OptConfig& config_;
  LinearModel model_;
};

constexpr int kMaxHalvings = 60;
constexpr double kArmijo = 1e-4;

// Backtracking from `step` along `dir`. Returns false if no decrease found.
bool line_search(Evaluator& ev, const Vector& theta, double f0,
                 const Vector& grad, const Vector& dir, double step,
                 Vector& theta_out, double& f_out) {
  const double slope = grad.dot(dir);
  for (int h = 0; h < kMaxHalvings; ++h) {
    theta_out = theta + step * dir;
    f_out = ev.value(theta_out);
    if (f_out <= f0 + kArmijo * step * slope && f_out < f0) return true;
    step *= 0.5;
  }
  return false;
}

}  // namespace

FitResult fit(const GlmProblem& problem, const OptConfig& config) {
  config.validate();
  problem.validate();
  Evaluator ev(problem, config);
  Vector theta = Vector::Zero(problem.d() * problem.family.width() +
                              problem.family.width());
  double f = ev.value(theta);
  Vector g = ev.grad(theta);
  OptTrace trace;
  trace.objective.push_back(f);
  trace.grad_norm.push_back(g.norm());

  std::deque<std::pair<Vector, Vector>> memory;  // (s_k, y_k)
  double step = config.step_size;
  for (int it = 0; it < config.max_iters; ++it) {
    if (g.norm() <= config.grad_tol) {
      trace.status = OptStatus::kConverged;
      break;
    }
    Vector dir = -g;
    if (config.method == Method::kLbfgs && !memory.empty()) {
      // Two-loop recursion.
      std::vector<double> a(memory.size());
      Vector q = g;
      for (std::size_t k = memory.size(); k-- > 0;) {
        const auto& [sk, yk] = memory[k];
        a[k] = sk.dot(q) / yk.dot(sk);
        q -= a[k] * yk;
      }
      const auto& [sl, yl] = memory.back();
      q *= sl.dot(yl) / yl.dot(yl);
      for (std::size_t k = 0; k < memory.size(); ++k) {
        const auto& [sk, yk] = memory[k];
        const double b = yk.dot(q) / yk.dot(sk);
        q += (a[k] - b) * sk;
      }
      dir = -q;
      if (g.dot(dir) >= 0.0) {
        memory.clear();
        dir = -g;
      }
    }
    const double trial = config.method == Method::kLbfgs && !memory.empty()
                             ? 1.0
                             : step;
    Vector theta_new;
    double f_new = 0.0;
    bool moved = line_search(ev, theta, f, g, dir, trial, theta_new, f_new);
    if (!moved && !memory.empty()) {
      memory.clear();
      dir = -g;
      moved = line_search(ev, theta, f, g, dir, step, theta_new, f_new);
    }
    if (!moved) {
      // No representable decrease left: a stationary point to working
      // precision.
      trace.status = OptStatus::kConverged;
      break;
    }
    require(std::isfinite(f_new), ErrorKind::kNumerical,
            "optimizer diverged at iteration " + std::to_string(it));
    const Vector g_new = ev.grad(theta_new);
    const Vector sk = theta_new - theta;
    const Vector yk = g_new - g;
    if (config.method == Method::kLbfgs && sk.dot(yk) > 1e-12 * sk.norm() * yk.norm()) {
      memory.emplace_back(sk, yk);
      if (static_cast<int>(memory.size()) > config.lbfgs_memory) {
        memory.pop_front();
      }
    }
    theta = theta_new;
    f = f_new;
    g = g_new;
    trace.objective.push_back(f);
    trace.grad_norm.push_back(g.norm());
    trace.iterations = it + 1;
  }
  if (trace.status != OptStatus::kConverged && g.norm() <= config.grad_tol) {
    trace.status = OptStatus::kConverged;
  }
  return {ev.model_at(theta), std::move(trace)};
}

EstimandRows model_rows(const LinearModel& model, const GlmProblem& problem) {
  const Matrix eta_p = model.eta(problem.source_features);
  const Matrix eta_q = model.eta(problem.target_features);
  return glm_rows(problem.family, eta_p, eta_q, problem.source_labels,
                  problem.source_g, problem.target_g, as_span(problem.source_w),
                  as_span(problem.target_w),
                  problem.target_labels ? &*problem.target_labels : nullptr);
}

double test_loss(const LinearModel& model, const TestSet& test) {
  require(test.labels.rows() == test.features.rows(), ErrorKind::kShape,
          "test set: label rows differ from feature rows");
  const Matrix eta = model.eta(test.features);
  return mean(row_losses(model.family, eta, test.labels));
}

std::vector<SweepRow> sweep(const GlmProblem& problem,
                            const std::vector<double>& s_grid,
                            const OptConfig& config,
                            const std::optional<TestSet>& test) {
  require(!s_grid.empty(), ErrorKind::kInvalidArgument, "sweep: empty s grid");
  for (double s : s_grid) {
    require(s >= 0.0 && std::isfinite(s), ErrorKind::kInvalidArgument,
            "sweep: grid values must be finite and non-negative");
  }
  OptConfig dr_config = config;
  dr_config.objective = Objective::kDr;
  dr_config.s = 0.0;
  const FitResult dr_fit = fit(problem, dr_config);
  const ObjectiveParts dr_parts = worst_case_parts(dr_fit.model, problem, 0.0);

  std::vector<SweepRow> rows;
  rows.reserve(s_grid.size());
  for (double s : s_grid) {
    SweepRow row;
    row.s = s;
    row.worst_case_at_dr_model =
        dr_parts.dr + s * dr_parts.sigma * dr_parts.nu;
    try {
      OptConfig c = config;
      c.objective = Objective::kWorstCase;
      c.s = s;
      FitResult r = fit(problem, c);
      const ObjectiveParts parts = worst_case_parts(r.model, problem, s);
      row.l_dr_s = parts.dr;
      row.sigma = parts.sigma;
      row.nu = parts.nu;
      row.worst_case = parts.dr + s * parts.sigma * parts.nu;
      row.best_case = parts.dr - s * parts.sigma * parts.nu;
      if (test) row.test_loss = test_loss(r.model, *test);
      row.model = std::move(r.model);
      row.trace = std::move(r.trace);
      row.ok = true;
    } catch (const Error& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace ovb
