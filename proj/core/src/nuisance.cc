#include "ovb/nuisance.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ovb/error.h"
#include "ovb/numeric.h"

namespace ovb {
namespace {

constexpr int kNewtonMaxIters = 100;
constexpr double kNewtonTol = 1e-10;

RowIndices shuffled(Index count, std::uint64_t seed, std::uint64_t stream) {
  RowIndices idx(static_cast<std::size_t>(count));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto rng = make_engine(seed, stream);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

void split_one(Index rows, double frac, std::uint64_t seed,
               std::uint64_t stream, RowIndices* nuisance, RowIndices* main,
               const char* side) {
  const auto held = static_cast<std::size_t>(
      std::llround(frac * static_cast<double>(rows)));
  const auto total = static_cast<std::size_t>(rows);
  if (held < 2 || total - held < 2) {
    fail(ErrorKind::kInvalidArgument,
         std::string("split_folds: ") + side + " side with " +
             std::to_string(rows) + " rows and holdout fraction " +
             format_double(frac) + " leaves a fold with fewer than 2 rows");
  }
  RowIndices perm = shuffled(rows, seed, stream);
  nuisance->assign(perm.begin(), perm.begin() + static_cast<long>(held));
  main->assign(perm.begin() + static_cast<long>(held), perm.end());
  std::sort(nuisance->begin(), nuisance->end());
  std::sort(main->begin(), main->end());
}

double default_lambda(const Matrix& xc, double scale) {
  if (xc.cols() == 0) return 0.0;
  const double tr = xc.squaredNorm();
  const double lam = scale * tr / static_cast<double>(xc.cols());
  return lam > 0.0 ? lam : 1e-12;
}

Matrix with_intercept(const Matrix& x) {
  Matrix xa(x.rows(), x.cols() + 1);
  xa.leftCols(x.cols()) = x;
  xa.col(x.cols()).setOnes();
  return xa;
}

// Identity link: exact solve of (Xc'Xc + lambda I) beta = Xc'yc, intercept
// from the means so it is not penalized.
void fit_ridge_identity(const Matrix& x, const Matrix& y,
                        std::optional<double> lambda, OutcomeModel* model) {
  const Eigen::RowVectorXd xm = x.colwise().mean();
  const Eigen::RowVectorXd ym = y.colwise().mean();
  const Matrix xc = x.rowwise() - xm;
  const Matrix yc = y.rowwise() - ym;
  const double lam = lambda ? *lambda : default_lambda(xc, 1e-3);
  require(lam >= 0.0, ErrorKind::kInvalidArgument,
          "ridge lambda must be non-negative");
  Eigen::MatrixXd gram = xc.transpose() * xc;
  gram.diagonal().array() += lam;
  if (lam == 0.0) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    if (gram.rows() > 0 && lu.rank() < gram.rows()) {
      fail(ErrorKind::kNumerical,
           "ridge with lambda = 0: feature Gram matrix is singular");
    }
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success) {
    fail(ErrorKind::kNumerical, "ridge normal equations are not solvable");
  }
  const Eigen::MatrixXd rhs = xc.transpose() * yc;
  model->coef = ldlt.solve(rhs);
  model->intercept = ym - xm * model->coef;
  model->lambda = lam;
}

double sigmoid_ce(double eta, double y) {
  // -(y eta - log(1 + e^eta))
  return log1p_exp(eta) - y * eta;
}

// Penalized multinomial logistic regression by damped Newton. Columns of y
// are class probabilities. Slopes carry lambda; intercepts a tiny ridge that
// pins the softmax shift invariance.
void fit_softmax(const Matrix& x, const Matrix& y, double lambda,
                 Matrix* coef, Eigen::RowVectorXd* intercept, int* iters) {
  const Index n = x.rows();
  const Index p = x.cols() + 1;
  const Index k = y.cols();
  const Matrix xa = with_intercept(x);
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(p, k);
  Eigen::VectorXd pen = Eigen::VectorXd::Constant(p, lambda);
  pen[p - 1] = 1e-8;

  auto objective = [&](const Eigen::MatrixXd& th) {
    const Matrix eta = xa * th;
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
      const auto row = row_span(eta, i);
      const double lse = log_sum_exp(row);
      for (Index c = 0; c < k; ++c) total -= y(i, c) * (row[c] - lse);
    }
    for (Index c = 0; c < k; ++c) {
      total += 0.5 * (pen.array() * th.col(c).array().square()).sum();
    }
    return total;
  };

  double current = objective(theta);
  int it = 0;
  for (; it < kNewtonMaxIters; ++it) {
    const Matrix eta = xa * theta;
    Matrix prob(n, k);
    for (Index i = 0; i < n; ++i) {
      const auto row = row_span(eta, i);
      const double lse = log_sum_exp(row);
      for (Index c = 0; c < k; ++c) prob(i, c) = std::exp(row[c] - lse);
    }
    const Eigen::MatrixXd grad_m =
        xa.transpose() * (prob - y) + pen.asDiagonal() * theta;
    Eigen::VectorXd grad(p * k);
    for (Index c = 0; c < k; ++c) grad.segment(c * p, p) = grad_m.col(c);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(p * k, p * k);
    for (Index a = 0; a < k; ++a) {
      for (Index b = a; b < k; ++b) {
        Eigen::VectorXd wts(n);
        for (Index i = 0; i < n; ++i) {
          wts[i] = prob(i, a) * ((a == b ? 1.0 : 0.0) - prob(i, b));
        }
        const Eigen::MatrixXd block =
            xa.transpose() * wts.asDiagonal() * xa;
        hess.block(a * p, b * p, p, p) = block;
        if (a != b) hess.block(b * p, a * p, p, p) = block.transpose();
      }
      hess.block(a * p, a * p, p, p).diagonal() += pen;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    Eigen::VectorXd step = ldlt.solve(grad);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) step = grad;
    double t = 1.0;
    Eigen::MatrixXd next = theta;
    double next_obj = current;
    for (int halvings = 0; halvings < 40; ++halvings, t *= 0.5) {
      for (Index c = 0; c < k; ++c) {
        next.col(c) = theta.col(c) - t * step.segment(c * p, p);
      }
      next_obj = objective(next);
      if (next_obj <= current) break;
    }
    if (!(next_obj <= current)) break;
    const double change = (next - theta).cwiseAbs().maxCoeff();
    theta = next;
    current = next_obj;
    if (change < kNewtonTol) {
      ++it;
      break;
    }
  }
  *coef = theta.topRows(p - 1);
  *intercept = theta.row(p - 1);
  *iters = it;
}

Matrix apply_link(OutputLink link, const Matrix& eta) {
  Matrix out = eta;
  switch (link) {
    case OutputLink::kIdentity:
      break;
    case OutputLink::kLogistic:
      for (Index i = 0; i < out.size(); ++i) {
        out.data()[i] = sigmoid(out.data()[i]);
      }
      break;
    case OutputLink::kSoftmax:
      for (Index i = 0; i < out.rows(); ++i) {
        const double lse = log_sum_exp(row_span(eta, i));
        for (Index c = 0; c < out.cols(); ++c) {
          out(i, c) = std::exp(eta(i, c) - lse);
        }
      }
      break;
  }
  return out;
}

double link_objective(OutputLink link, const Matrix& out, const Matrix& y) {
  double total = 0.0;
  const Index n = out.rows();
  switch (link) {
    case OutputLink::kIdentity:
      total = 0.5 * (out - y).squaredNorm();
      break;
    case OutputLink::kLogistic:
      for (Index i = 0; i < out.size(); ++i) {
        total += sigmoid_ce(out.data()[i], y.data()[i]);
      }
      break;
    case OutputLink::kSoftmax:
      for (Index i = 0; i < n; ++i) {
        const auto row = row_span(out, i);
        const double lse = log_sum_exp(row);
        for (Index c = 0; c < out.cols(); ++c) total -= y(i, c) * (row[c] - lse);
      }
      break;
  }
  return total / static_cast<double>(n);
}

void fit_net(const Matrix& x, const Matrix& y, const OutcomeConfig& cfg,
             std::uint64_t seed, OutcomeModel* model) {
  require(cfg.net_width >= 1, ErrorKind::kInvalidArgument,
          "net width must be positive");
  require(cfg.net_step > 0.0, ErrorKind::kInvalidArgument,
          "net step size must be positive");
  const Index n = x.rows();
  const Index d = x.cols();
  const Index k = y.cols();
  const Index h = cfg.net_width;

  model->input_mean = x.colwise().mean();
  const Matrix xc = x.rowwise() - model->input_mean;
  model->input_scale =
      (xc.colwise().squaredNorm() / static_cast<double>(n)).array().sqrt();
  for (Index j = 0; j < d; ++j) {
    if (!(model->input_scale[j] > 0.0)) model->input_scale[j] = 1.0;
  }
  const Matrix xs = xc.array().rowwise() / model->input_scale.array();

  Matrix ys = y;
  model->target_mean = Eigen::RowVectorXd::Zero(k);
  model->target_scale = Eigen::RowVectorXd::Ones(k);
  if (model->link == OutputLink::kIdentity) {
    model->target_mean = y.colwise().mean();
    const Matrix yc = y.rowwise() - model->target_mean;
    model->target_scale =
        (yc.colwise().squaredNorm() / static_cast<double>(n)).array().sqrt();
    for (Index c = 0; c < k; ++c) {
      if (!(model->target_scale[c] > 0.0)) model->target_scale[c] = 1.0;
    }
    ys = yc.array().rowwise() / model->target_scale.array();
  }

  auto rng = make_engine(seed, 11);
  const double r1 = std::sqrt(6.0 / static_cast<double>(d + h));
  const double r2 = std::sqrt(6.0 / static_cast<double>(h + k));
  std::uniform_real_distribution<double> u1(-r1, r1), u2(-r2, r2);
  model->hidden_weights = Matrix(d, h);
  for (Index i = 0; i < model->hidden_weights.size(); ++i) {
    model->hidden_weights.data()[i] = u1(rng);
  }
  model->hidden_bias = Eigen::RowVectorXd::Zero(h);
  model->output_weights = Matrix(h, k);
  for (Index i = 0; i < model->output_weights.size(); ++i) {
    model->output_weights.data()[i] = u2(rng);
  }
  model->output_bias = Eigen::RowVectorXd::Zero(k);
  if (model->link != OutputLink::kIdentity) {
    const Eigen::RowVectorXd freq = y.colwise().mean();
    for (Index c = 0; c < k; ++c) {
      const double f = std::clamp(freq[c], 1e-6, 1.0 - 1e-6);
      model->output_bias[c] = model->link == OutputLink::kLogistic
                                  ? std::log(f / (1.0 - f))
                                  : std::log(f);
    }
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  double prev = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < cfg.net_max_iters; ++it) {
    const Matrix act =
        ((xs * model->hidden_weights).rowwise() + model->hidden_bias)
            .array()
            .tanh()
            .matrix();
    const Matrix out =
        (act * model->output_weights).rowwise() + model->output_bias;
    const double obj = link_objective(model->link, out, ys);
    require(std::isfinite(obj), ErrorKind::kNumerical,
            "outcome net training diverged");
    if (std::abs(prev - obj) <= cfg.net_tol * std::max(1.0, std::abs(obj))) {
      break;
    }
    prev = obj;
    const Matrix d_out = (apply_link(model->link, out) - ys) * inv_n;
    const Matrix g_w2 = act.transpose() * d_out;
    const Eigen::RowVectorXd g_b2 = d_out.colwise().sum();
    const Matrix d_act = ((d_out * model->output_weights.transpose()).array() *
                          (1.0 - act.array().square()))
                             .matrix();
    const Matrix g_w1 = xs.transpose() * d_act;
    const Eigen::RowVectorXd g_b1 = d_act.colwise().sum();
    model->output_weights -= cfg.net_step * g_w2;
    model->output_bias -= cfg.net_step * g_b2;
    model->hidden_weights -= cfg.net_step * g_w1;
    model->hidden_bias -= cfg.net_step * g_b1;
  }
  model->iterations = it;
}

}  // namespace

FoldPlan split_folds(Index n, Index m, double holdout_frac,
                     std::uint64_t seed) {
  require(holdout_frac > 0.0 && holdout_frac < 1.0,
          ErrorKind::kInvalidArgument,
          "holdout fraction must lie strictly between 0 and 1");
  FoldPlan plan;
  plan.seed = seed;
  split_one(n, holdout_frac, seed, 1, &plan.nuisance_source, &plan.main_source,
            "source");
  split_one(m, holdout_frac, seed, 2, &plan.nuisance_target, &plan.main_target,
            "target");
  return plan;
}

FoldPlan split_folds(const ShiftDataset& dataset, double holdout_frac,
                     std::uint64_t seed) {
  return split_folds(dataset.n(), dataset.m(), holdout_frac, seed);
}

OutputLink label_link(const LossFamily& family) {
  switch (family.task()) {
    case Task::kRegression: return OutputLink::kIdentity;
    case Task::kBinary: return OutputLink::kLogistic;
    case Task::kMulticlass: return OutputLink::kSoftmax;
    case Task::kSeqGen: break;
  }
  fail(ErrorKind::kInvalidArgument,
       "no label-space outcome model for the seqgen family");
}

Matrix OutcomeModel::predict(const Matrix& features) const {
  require(features.cols() == input_dim, ErrorKind::kShape,
          "outcome model expects " + std::to_string(input_dim) +
              " features, got " + std::to_string(features.cols()));
  if (kind == OutcomeKind::kRidge) {
    const Matrix eta = (features * coef).rowwise() + intercept;
    return apply_link(link, eta);
  }
  const Matrix xs = (features.rowwise() - input_mean).array().rowwise() /
                    input_scale.array();
  const Matrix act =
      ((xs * hidden_weights).rowwise() + hidden_bias).array().tanh().matrix();
  const Matrix out = (act * output_weights).rowwise() + output_bias;
  if (link == OutputLink::kIdentity) {
    return (out.array().rowwise() * target_scale.array()).matrix().rowwise() +
           target_mean;
  }
  return apply_link(link, out);
}

OutcomeModel fit_outcome(const Matrix& features, const Matrix& targets,
                         const OutcomeConfig& config, TargetMode mode,
                         OutputLink link, std::uint64_t seed) {
  require(features.rows() == targets.rows(), ErrorKind::kShape,
          "fit_outcome: feature and target row counts differ");
  require(features.rows() >= 2, ErrorKind::kInvalidArgument,
          "fit_outcome: need at least 2 rows");
  require(targets.cols() >= 1, ErrorKind::kShape,
          "fit_outcome: targets need at least one column");
  require(features.allFinite() && targets.allFinite(), ErrorKind::kData,
          "fit_outcome: non-finite input");
  require(link != OutputLink::kLogistic || targets.cols() == 1,
          ErrorKind::kShape, "logistic outcome model needs one target column");
  OutcomeModel model;
  model.kind = config.kind;
  model.mode = mode;
  model.link = link;
  model.input_dim = features.cols();
  model.output_dim = targets.cols();
  model.seed = seed;
  if (config.kind == OutcomeKind::kNet) {
    fit_net(features, targets, config, seed, &model);
    return model;
  }
  switch (link) {
    case OutputLink::kIdentity:
      fit_ridge_identity(features, targets, config.ridge_lambda, &model);
      break;
    case OutputLink::kLogistic: {
      const Matrix xc = features.rowwise() - features.colwise().mean();
      const double lam =
          config.ridge_lambda ? *config.ridge_lambda : default_lambda(xc, 1e-3);
      const LogisticFit fit = fit_logistic(features, targets.col(0), lam);
      model.coef = fit.coef;
      model.intercept = Eigen::RowVectorXd::Constant(1, fit.intercept);
      model.lambda = lam;
      model.iterations = fit.iterations;
      break;
    }
    case OutputLink::kSoftmax: {
      const Matrix xc = features.rowwise() - features.colwise().mean();
      const double lam =
          config.ridge_lambda ? *config.ridge_lambda : default_lambda(xc, 1e-3);
      fit_softmax(features, targets, lam, &model.coef, &model.intercept,
                  &model.iterations);
      model.lambda = lam;
      break;
    }
  }
  return model;
}

LogisticFit fit_logistic(const Matrix& features, const Vector& y,
                         double lambda) {
  const Index n = features.rows();
  const Index p = features.cols() + 1;
  require(y.size() == n, ErrorKind::kShape, "fit_logistic: length mismatch");
  const Matrix xa = with_intercept(features);
  Eigen::VectorXd pen = Eigen::VectorXd::Constant(p, lambda);
  pen[p - 1] = 0.0;
  auto objective = [&](const Eigen::VectorXd& th) {
    const Eigen::VectorXd eta = xa * th;
    double total = 0.0;
    for (Index i = 0; i < n; ++i) total += sigmoid_ce(eta[i], y[i]);
    return total + 0.5 * (pen.array() * th.array().square()).sum();
  };
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
  const double ybar = y.mean();
  if (ybar > 0.0 && ybar < 1.0) theta[p - 1] = std::log(ybar / (1.0 - ybar));
  double current = objective(theta);
  int it = 0;
  for (; it < kNewtonMaxIters; ++it) {
    const Eigen::VectorXd eta = xa * theta;
    Eigen::VectorXd prob(n), wts(n);
    for (Index i = 0; i < n; ++i) {
      prob[i] = sigmoid(eta[i]);
      wts[i] = prob[i] * (1.0 - prob[i]);
    }
    const Eigen::VectorXd grad =
        xa.transpose() * (prob - y) + pen.cwiseProduct(theta);
    Eigen::MatrixXd hess = xa.transpose() * wts.asDiagonal() * xa;
    hess.diagonal() += pen;
    hess.diagonal().array() += 1e-10;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    Eigen::VectorXd step = ldlt.solve(grad);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) step = grad;
    double t = 1.0;
    Eigen::VectorXd next = theta;
    double next_obj = current;
    for (int halvings = 0; halvings < 40; ++halvings, t *= 0.5) {
      next = theta - t * step;
      next_obj = objective(next);
      if (next_obj <= current) break;
    }
    if (!(next_obj <= current)) break;
    const double change = (next - theta).cwiseAbs().maxCoeff();
    theta = next;
    current = next_obj;
    if (change < kNewtonTol) {
      ++it;
      break;
    }
  }
  LogisticFit fit;
  fit.coef = theta.head(p - 1);
  fit.intercept = theta[p - 1];
  fit.iterations = it;
  return fit;
}

Vector DensityRatioModel::domain_probability(const Matrix& features) const {
  require(features.cols() == input_dim(), ErrorKind::kShape,
          "density ratio model expects " + std::to_string(input_dim()) +
              " features, got " + std::to_string(features.cols()));
  Vector logit = (features * coef).array() + intercept;
  for (Index i = 0; i < logit.size(); ++i) logit[i] = sigmoid(logit[i]);
  return logit;
}

Vector DensityRatioModel::predict_unclipped(const Matrix& features) const {
  require(features.cols() == input_dim(), ErrorKind::kShape,
          "density ratio model expects " + std::to_string(input_dim()) +
              " features, got " + std::to_string(features.cols()));
  const double shift = std::log(prior_correction);
  Vector w = (features * coef).array() + intercept + shift;
  return w.array().exp();
}

RatioPrediction DensityRatioModel::predict(const Matrix& features) const {
  RatioPrediction out;
  out.weights = predict_unclipped(features);
  for (Index i = 0; i < out.weights.size(); ++i) {
    double& w = out.weights[i];
    if (!(w >= clip.lo)) {
      w = clip.lo;
      ++out.clipped_low;
    } else if (w > clip.hi) {
      w = clip.hi;
      ++out.clipped_high;
    }
  }
  return out;
}

DensityRatioModel fit_density_ratio(const Matrix& source_features,
                                    const Matrix& target_features,
                                    std::uint64_t seed, ClipBounds clip) {
  require(source_features.rows() >= 1 && target_features.rows() >= 1,
          ErrorKind::kInvalidArgument,
          "fit_density_ratio: both samples must be non-empty");
  require(source_features.cols() == target_features.cols(), ErrorKind::kShape,
          "fit_density_ratio: feature dimensions differ");
  require(clip.lo > 0.0 && clip.lo <= clip.hi, ErrorKind::kInvalidArgument,
          "clip bounds must satisfy 0 < lo <= hi");
  const Index np = source_features.rows();
  const Index nq = target_features.rows();
  Matrix x(np + nq, source_features.cols());
  x.topRows(np) = source_features;
  x.bottomRows(nq) = target_features;
  Vector y(np + nq);
  y.head(np).setZero();
  y.tail(nq).setOnes();
  const Matrix xc = x.rowwise() - x.colwise().mean();
  const double lam = default_lambda(xc, 1e-4);
  const LogisticFit fit = fit_logistic(x, y, lam);

  DensityRatioModel model;
  model.coef = fit.coef;
  model.intercept = fit.intercept;
  model.prior_correction =
      static_cast<double>(np) / static_cast<double>(nq);
  model.clip = clip;
  model.lambda = lam;
  model.seed = seed;
  const Vector logit = (x * fit.coef).array() + fit.intercept;
  bool separable = true;
  for (Index i = 0; i < np + nq && separable; ++i) {
    separable = i < np ? logit[i] < 0.0 : logit[i] > 0.0;
  }
  model.separable = separable;
  return model;
}

NuisanceSet fit_nuisances(const ShiftDataset& dataset, const FoldPlan& folds,
                          const Matrix& outcome_targets, TargetMode mode,
                          OutputLink link, const NuisanceConfig& config) {
  require(outcome_targets.rows() == dataset.n(), ErrorKind::kShape,
          "outcome targets need one row per source row");
  NuisanceSet set;
  set.folds = folds;
  const Matrix xp = select_rows(dataset.source_features, folds.nuisance_source);
  const Matrix xq = select_rows(dataset.target_features, folds.nuisance_target);
  set.outcome =
      fit_outcome(xp, select_rows(outcome_targets, folds.nuisance_source),
                  config.outcome, mode, link, mix_seed(config.seed, 21));
  set.ratio = fit_density_ratio(xp, xq, mix_seed(config.seed, 22), config.clip);
  return set;
}

NuisanceSet fit_glm_nuisances(const ShiftDataset& dataset,
                              const LossFamily& family,
                              const NuisanceConfig& config) {
  const FoldPlan folds =
      split_folds(dataset, config.holdout_frac, config.seed);
  return fit_nuisances(dataset, folds, dataset.source_labels,
                       TargetMode::kPredictsLabel, label_link(family), config);
}

}  // namespace ovb
