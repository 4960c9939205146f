#include "ovb/bounds.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "ovb/error.h"
#include "ovb/numeric.h"

namespace ovb {
namespace {

void check_nonneg(double v, const char* what) {
  require(v >= 0.0 && std::isfinite(v), ErrorKind::kInvalidArgument,
          std::string(what) + " must be finite and non-negative");
}

struct Replicate {
  double dr = 0.0;
  double sigma = 0.0;
  double nu = 0.0;
  double test = 0.0;
};

// One bootstrap replicate of the row means.
class Resampler {
 public:
  explicit Resampler(const EstimandRows& rows) : rows_(rows) {
    require(rows.n() >= 2 && rows.m() >= 2, ErrorKind::kInvalidArgument,
            "bootstrap: each fold needs at least 2 rows to resample");
    src_.resize(rows.n());
    tgt_.resize(rows.m());
    buf_p_.resize(rows.n());
    buf_q_.resize(rows.m());
  }

  Replicate draw(std::uint64_t seed, std::uint64_t b) {
    auto rng = make_engine(seed, b);
    std::uniform_int_distribution<std::size_t> pick_p(0, rows_.n() - 1);
    std::uniform_int_distribution<std::size_t> pick_q(0, rows_.m() - 1);
    for (auto& i : src_) i = pick_p(rng);
    for (auto& j : tgt_) j = pick_q(rng);
    Replicate r;
    r.dr = mean_p(rows_.dr_source) + mean_q(rows_.dr_target);
    r.sigma = std::sqrt(mean_p(rows_.residual_sq));
    r.nu = std::sqrt(mean_p(rows_.alpha_sq));
    if (!rows_.target_loss.empty()) r.test = mean_q(rows_.target_loss);
    return r;
  }

 private:
  double mean_p(const std::vector<double>& v) {
    for (std::size_t k = 0; k < src_.size(); ++k) buf_p_[k] = v[src_[k]];
    return pairwise_sum(buf_p_) / static_cast<double>(buf_p_.size());
  }
  double mean_q(const std::vector<double>& v) {
    for (std::size_t k = 0; k < tgt_.size(); ++k) buf_q_[k] = v[tgt_[k]];
    return pairwise_sum(buf_q_) / static_cast<double>(buf_q_.size());
  }

  const EstimandRows& rows_;
  std::vector<std::size_t> src_, tgt_;
  std::vector<double> buf_p_, buf_q_;
};

void check_options(const BootstrapOptions& options) {
  require(options.replicates >= 100, ErrorKind::kInvalidArgument,
          "bootstrap needs at least 100 replicates");
  require(options.level > 0.0 && options.level < 1.0,
          ErrorKind::kInvalidArgument,
          "confidence level must lie strictly between 0 and 1");
}

std::pair<double, double> percentile_interval(std::vector<double> values,
                                              double level) {
  std::sort(values.begin(), values.end());
  const double tail = 0.5 * (1.0 - level);
  return {quantile_sorted(values, tail), quantile_sorted(values, 1.0 - tail)};
}

// Folds a signed interval [lo, hi] of (l_test - l_dr)/(sigma nu) into a
// magnitude interval, then widens it to contain `point`.
SensitivityRange fold_range(double point, double lo, double hi) {
  SensitivityRange out;
  out.point = point;
  out.signed_low = lo;
  out.signed_high = hi;
  if (lo <= 0.0 && hi >= 0.0) {
    out.low = 0.0;
    out.high = std::max(-lo, hi);
  } else {
    out.low = std::min(std::abs(lo), std::abs(hi));
    out.high = std::max(std::abs(lo), std::abs(hi));
  }
  out.low = std::min(out.low, point);
  out.high = std::max(out.high, point);
  return out;
}

SensitivityEstimate sensitivity_impl(std::span<const double> g_long,
                                     std::span<const double> g_short,
                                     std::span<const double> alpha_long,
                                     std::span<const double> alpha_short,
                                     std::span<const double> targets,
                                     SensitivitySource source, bool strict) {
  const std::size_t n = g_long.size();
  require(g_short.size() == n && alpha_long.size() == n &&
              alpha_short.size() == n && targets.size() == n,
          ErrorKind::kShape, "sensitivity: length mismatch");
  require(n >= 2, ErrorKind::kInvalidArgument,
          "sensitivity: need at least 2 rows");
  std::vector<double> gdiff(n), adiff(n), gd_sq(n), resid_sq(n), al_sq(n),
      as_sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    gdiff[i] = g_long[i] - g_short[i];
    adiff[i] = alpha_long[i] - alpha_short[i];
    gd_sq[i] = gdiff[i] * gdiff[i];
    const double r = targets[i] - g_short[i];
    resid_sq[i] = r * r;
    al_sq[i] = alpha_long[i] * alpha_long[i];
    as_sq[i] = alpha_short[i] * alpha_short[i];
  }
  const double fid = mean(resid_sq);
  require(fid > 0.0, ErrorKind::kNumerical,
          "short model is perfect: zero fidelity denominator");
  const double short_overlap = mean(as_sq);
  require(short_overlap > 0.0, ErrorKind::kNumerical,
          "short Riesz representer is identically zero");
  double cd2 = (mean(al_sq) - short_overlap) / short_overlap;
  if (cd2 < 0.0) {
    if (strict) {
      fail(ErrorKind::kInvalidArgument,
           "long overlap smaller than short: inconsistent long/short inputs");
    }
    cd2 = 0.0;
  }
  SensitivityEstimate est;
  est.source = source;
  est.cy = std::sqrt(mean(gd_sq) / fid);
  est.cd = std::sqrt(cd2);
  const double corr = pearson(gdiff, adiff);
  if (std::isnan(corr)) {
    if (strict) {
      fail(ErrorKind::kNumerical,
           "rho undefined: a long-minus-short difference has zero variance");
    }
    est.rho = 0.0;
    est.degenerate = true;
  } else {
    est.rho = std::min(1.0, std::abs(corr));
  }
  return est;
}

}  // namespace

SensitivityBudget SensitivityBudget::from_product(double s) {
  check_nonneg(s, "sensitivity budget s");
  return SensitivityBudget(s);
}

SensitivityBudget SensitivityBudget::from_components(double rho_max,
                                                     double cy_max,
                                                     double cd_max) {
  require(rho_max >= 0.0 && rho_max <= 1.0, ErrorKind::kInvalidArgument,
          "rho_max must lie in [0, 1]");
  check_nonneg(cy_max, "cy_max");
  check_nonneg(cd_max, "cd_max");
  SensitivityBudget b(rho_max * cy_max * cd_max);
  b.rho_max_ = rho_max;
  b.cy_max_ = cy_max;
  b.cd_max_ = cd_max;
  return b;
}

SensitivityBudget SensitivityBudget::scaled(double factor) const {
  return from_product(s_ * factor);
}

std::string source_name(SensitivitySource source) {
  switch (source) {
    case SensitivitySource::kOracle: return "oracle";
    case SensitivitySource::kInferred: return "inferred";
    case SensitivitySource::kBenchmarked: return "benchmarked";
  }
  return "unknown";
}

double ovb_bound(double s, double sigma, double nu) {
  check_nonneg(s, "s");
  check_nonneg(sigma, "sigma");
  check_nonneg(nu, "nu");
  return s * sigma * nu;
}

WorstCaseReport worst_case(double l_dr_s, const SensitivityBudget& budget,
                           double sigma, double nu) {
  require(std::isfinite(l_dr_s), ErrorKind::kInvalidArgument,
          "worst_case: DR estimate is not finite");
  WorstCaseReport r;
  r.l_dr_s = l_dr_s;
  r.sigma = sigma;
  r.nu = nu;
  r.budget = budget;
  r.bound_term = ovb_bound(budget.s(), sigma, nu);
  r.worst_case = l_dr_s + r.bound_term;
  r.best_case = l_dr_s - r.bound_term;
  r.ci_low = r.worst_case;
  r.ci_high = r.worst_case;
  return r;
}

SensitivityEstimate true_sensitivity(std::span<const double> g_long,
                                     std::span<const double> g_short,
                                     std::span<const double> alpha_long,
                                     std::span<const double> alpha_short,
                                     std::span<const double> residual_targets) {
  return sensitivity_impl(g_long, g_short, alpha_long, alpha_short,
                          residual_targets, SensitivitySource::kOracle, true);
}

SensitivityEstimate estimated_sensitivity(
    std::span<const double> g_long, std::span<const double> g_short,
    std::span<const double> alpha_long, std::span<const double> alpha_short,
    std::span<const double> residual_targets, SensitivitySource source) {
  return sensitivity_impl(g_long, g_short, alpha_long, alpha_short,
                          residual_targets, source, false);
}

double infer_sensitivity(double l_test, double l_dr_s, double sigma,
                         double nu) {
  check_nonneg(sigma, "sigma");
  check_nonneg(nu, "nu");
  const double gap = std::abs(l_test - l_dr_s);
  const double scale = sigma * nu;
  if (scale == 0.0) {
    require(gap == 0.0, ErrorKind::kNumerical,
            "bound cannot reach test performance: sigma * nu = 0");
    return 0.0;
  }
  return gap / scale;
}

BootstrapCi bootstrap_ci(const EstimandRows& rows,
                         const SensitivityBudget& budget,
                         const BootstrapOptions& options) {
  check_options(options);
  Resampler resampler(rows);
  const auto reps = static_cast<std::size_t>(options.replicates);
  std::vector<double> dr(reps), worst(reps), best(reps);
  for (std::size_t b = 0; b < reps; ++b) {
    const Replicate r = resampler.draw(options.seed, b);
    const double term = budget.s() * r.sigma * r.nu;
    dr[b] = r.dr;
    worst[b] = r.dr + term;
    best[b] = r.dr - term;
  }
  BootstrapCi ci;
  ci.replicates = options.replicates;
  std::tie(ci.dr_low, ci.dr_high) = percentile_interval(dr, options.level);
  std::tie(ci.worst_low, ci.worst_high) =
      percentile_interval(worst, options.level);
  std::tie(ci.best_low, ci.best_high) =
      percentile_interval(best, options.level);
  return ci;
}

WorstCaseReport worst_case_report(const EstimandRows& rows,
                                  const SensitivityBudget& budget,
                                  const BootstrapOptions& options) {
  const EvalReport ev = rows.report();
  WorstCaseReport r = worst_case(ev.dr, budget, ev.sigma(), ev.nu());
  const BootstrapCi ci = bootstrap_ci(rows, budget, options);
  r.ci_low = std::min(ci.worst_low, r.worst_case);
  r.ci_high = std::max(ci.worst_high, r.worst_case);
  return r;
}

SensitivityRange infer_sensitivity_range(const EstimandRows& rows,
                                         double l_test,
                                         const BootstrapOptions& options) {
  check_options(options);
  const EvalReport ev = rows.report();
  const double point = infer_sensitivity(l_test, ev.dr, ev.sigma(), ev.nu());
  const BootstrapCi ci =
      bootstrap_ci(rows, SensitivityBudget::from_product(0.0), options);
  require(ci.dr_low < ci.dr_high, ErrorKind::kNumerical,
          "degenerate bootstrap: all resamples identical");
  const double scale = ev.sigma() * ev.nu();
  // l_test - dr is decreasing in dr, so the CI edges swap.
  SensitivityRange out = fold_range(point, (l_test - ci.dr_high) / scale,
                                    (l_test - ci.dr_low) / scale);
  out.paired = false;
  return out;
}

SensitivityRange infer_sensitivity_range(const EstimandRows& rows,
                                         const BootstrapOptions& options) {
  check_options(options);
  require(!rows.target_loss.empty(), ErrorKind::kInvalidArgument,
          "paired sensitivity range needs target-domain losses");
  const EvalReport ev = rows.report();
  const double point =
      infer_sensitivity(*ev.test_loss, ev.dr, ev.sigma(), ev.nu());
  Resampler resampler(rows);
  const auto reps = static_cast<std::size_t>(options.replicates);
  std::vector<double> signed_s(reps);
  for (std::size_t b = 0; b < reps; ++b) {
    const Replicate r = resampler.draw(options.seed, b);
    const double scale = r.sigma * r.nu;
    const double gap = r.test - r.dr;
    signed_s[b] = scale > 0.0 ? gap / scale
                  : gap == 0.0 ? 0.0
                               : std::copysign(
                                     std::numeric_limits<double>::infinity(),
                                     gap);
  }
  const auto [lo, hi] = percentile_interval(signed_s, options.level);
  require(lo < hi, ErrorKind::kNumerical,
          "degenerate bootstrap: all resamples identical");
  SensitivityRange out = fold_range(point, lo, hi);
  out.paired = true;
  return out;
}

std::vector<int> kept_columns(int d, const std::vector<int>& omit) {
  std::vector<int> keep;
  for (int j = 0; j < d; ++j) {
    if (std::find(omit.begin(), omit.end(), j) == omit.end()) keep.push_back(j);
  }
  return keep;
}

SensitivityEstimate benchmark_sensitivity(const BenchmarkInputs& in) {
  const Index n = in.long_source.rows();
  const Index m = in.long_target.rows();
  const Index d = in.long_source.cols();
  require(in.long_target.cols() == d, ErrorKind::kShape,
          "benchmark: long source/target dimensions differ");
  require(!in.short_columns.empty(), ErrorKind::kInvalidArgument,
          "benchmark: short representation has no columns");
  for (int c : in.short_columns) {
    require(c >= 0 && c < d, ErrorKind::kInvalidArgument,
            "benchmark: short column outside the long representation");
  }
  require(in.source_labels.rows() == n, ErrorKind::kShape,
          "benchmark: label rows differ from source rows");

  Matrix targets;
  if (in.form == Form::kGlm) {
    require(in.family.width() == 1, ErrorKind::kInvalidArgument,
            "benchmark: GLM form supports scalar-outcome families only");
    require(in.eta_source.rows() == n && in.eta_source.cols() == 1,
            ErrorKind::kShape, "benchmark: eta_source must be n x 1");
    targets = in.source_labels;
  } else {
    require(static_cast<Index>(in.source_losses.size()) == n,
            ErrorKind::kShape, "benchmark: need one loss per source row");
    targets = Matrix(n, 1);
    for (Index i = 0; i < n; ++i) targets(i, 0) = in.source_losses[i];
  }

  const FoldPlan folds =
      split_folds(n, m, in.config.holdout_frac, in.config.seed);
  const Matrix short_source = select_cols(in.long_source, in.short_columns);
  const Matrix short_target = select_cols(in.long_target, in.short_columns);

  const TargetMode mode = in.form == Form::kGlm ? TargetMode::kPredictsLabel
                                                : TargetMode::kPredictsLoss;
  const OutputLink link =
      in.form == Form::kGlm ? label_link(in.family) : OutputLink::kIdentity;

  auto fit_pair = [&](const Matrix& xs, const Matrix& xt) {
    const Matrix xp = select_rows(xs, folds.nuisance_source);
    const Matrix xq = select_rows(xt, folds.nuisance_target);
    OutcomeModel g = fit_outcome(xp, select_rows(targets, folds.nuisance_source),
                                 in.config.outcome, mode, link,
                                 mix_seed(in.config.seed, 21));
    DensityRatioModel w = fit_density_ratio(
        xp, xq, mix_seed(in.config.seed, 22), in.config.clip);
    const Matrix main = select_rows(xs, folds.main_source);
    return std::pair<Vector, Vector>(g.predict(main).col(0),
                                     w.predict(main).weights);
  };
  const auto [g_long, w_long] = fit_pair(in.long_source, in.long_target);
  const auto [g_short, w_short] = fit_pair(short_source, short_target);

  const std::size_t nm = folds.main_source.size();
  std::vector<double> gl(nm), gs(nm), al(nm), as(nm), tg(nm);
  for (std::size_t k = 0; k < nm; ++k) {
    const auto row = static_cast<Index>(folds.main_source[k]);
    const double eta_factor =
        in.form == Form::kGlm ? in.eta_source(row, 0) : 1.0;
    gl[k] = g_long[static_cast<Index>(k)];
    gs[k] = g_short[static_cast<Index>(k)];
    al[k] = w_long[static_cast<Index>(k)] * eta_factor;
    as[k] = w_short[static_cast<Index>(k)] * eta_factor;
    tg[k] = targets(row, 0);
  }
  return estimated_sensitivity(gl, gs, al, as, tg,
                               SensitivitySource::kBenchmarked);
}

}  // namespace ovb
