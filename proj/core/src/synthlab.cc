#include "ovb/synthlab.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <utility>

#include "ovb/csv.h"
#include "ovb/error.h"
#include "ovb/numeric.h"

namespace ovb {
namespace {

constexpr double kProbTol = 1e-12;

// Uniform in [0, 1) from the top 53 bits; identical on every platform.
double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t draw_cell(const std::vector<double>& cumulative,
                      std::mt19937_64& rng) {
  const double u = unit_uniform(rng) * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min(static_cast<std::size_t>(it - cumulative.begin()),
                  cumulative.size() - 1);
}

struct Marginal {
  double p = 0.0;
  double q = 0.0;
  double p_target_sum = 0.0;  // sum of p_source * outcome
};

double sq(double v) { return v * v; }

}  // namespace

void OracleWorld::validate() const {
  require(!cells.empty(), ErrorKind::kInvalidArgument, "world has no cells");
  double sp = 0.0;
  double sq_ = 0.0;
  for (const auto& c : cells) {
    require(c.p_source >= 0.0 && c.p_target >= 0.0,
            ErrorKind::kInvalidArgument, "world: negative probability");
    sp += c.p_source;
    sq_ += c.p_target;
  }
  require(std::abs(sp - 1.0) < 1e-9 && std::abs(sq_ - 1.0) < 1e-9,
          ErrorKind::kInvalidArgument,
          "world: cell probabilities must sum to 1 in each domain");
  std::map<std::pair<double, double>, Marginal> xz;
  for (const auto& c : cells) {
    auto& mg = xz[{c.x, c.z}];
    mg.p += c.p_source;
    mg.q += c.p_target;
  }
  for (const auto& [key, mg] : xz) {
    require(mg.q == 0.0 || mg.p > 0.0, ErrorKind::kInvalidArgument,
            "world: overlap violated (target mass where source has none)");
  }
  for (const auto& c : cells) {
    const auto& mg = xz[{c.x, c.z}];
    if (mg.p > 0.0 && mg.q > 0.0) {
      require(std::abs(c.p_source / mg.p - c.p_target / mg.q) < kProbTol,
              ErrorKind::kInvalidArgument,
              "world: label rule differs between domains given (x, z)");
    }
  }
  for (const auto& c : cells) {
    const double y = c.y;
    validate_label(family, std::span<const double>(&y, 1));
  }
}

OracleWorld oracle_w1() {
  OracleWorld w;
  w.name = "w1";
  w.family = LossFamily::regression();
  for (int x = 0; x <= 1; ++x) {
    for (int z = 0; z <= 1; ++z) {
      w.cells.push_back({double(x), double(z), double(x + z), 0.25,
                         0.5 * (z == 1 ? 0.8 : 0.2)});
    }
  }
  w.slope = 1.0;
  w.bias = 0.0;
  return w;
}

OracleWorld oracle_w2() {
  OracleWorld w;
  w.name = "w2";
  w.family = LossFamily::binary();
  for (int x = 0; x <= 1; ++x) {
    for (int z = 0; z <= 1; ++z) {
      const double p1 = sigmoid(-1.0 + x + 1.5 * z);
      const double pp = 0.25;
      const double pq = 0.5 * (z == 1 ? 0.8 : 0.2);
      w.cells.push_back({double(x), double(z), 0.0, pp * (1 - p1),
                         pq * (1 - p1)});
      w.cells.push_back({double(x), double(z), 1.0, pp * p1, pq * p1});
    }
  }
  w.slope = 1.0;
  w.bias = -0.5;
  return w;
}

OracleWorld oracle_no_shift() {
  OracleWorld w = oracle_w1();
  w.name = "no_shift";
  for (auto& c : w.cells) c.p_target = c.p_source;
  return w;
}

TruthRecord enumerate_truth(const OracleWorld& world, Form form) {
  world.validate();
  require(form == Form::kGeneral || world.family.width() == 1,
          ErrorKind::kInvalidArgument,
          "enumerate_truth: GLM form needs a scalar-outcome family");
  const std::size_t c = world.cells.size();
  std::vector<double> loss(c), outcome(c), eta(c);
  for (std::size_t i = 0; i < c; ++i) {
    const auto& cell = world.cells[i];
    eta[i] = world.eta(cell.x);
    loss[i] = nll(world.family, std::span<const double>(&eta[i], 1),
                  std::span<const double>(&cell.y, 1));
    outcome[i] = form == Form::kGeneral ? loss[i] : cell.y;
  }
  std::map<std::pair<double, double>, Marginal> xz;
  std::map<double, Marginal> xs;
  for (std::size_t i = 0; i < c; ++i) {
    const auto& cell = world.cells[i];
    for (Marginal* mg : {&xz[{cell.x, cell.z}], &xs[cell.x]}) {
      mg->p += cell.p_source;
      mg->q += cell.p_target;
      mg->p_target_sum += cell.p_source * outcome[i];
    }
  }

  TruthRecord t;
  t.form = form;
  t.g_long.resize(c);
  t.g_short.resize(c);
  t.w_long.resize(c);
  t.w_short.resize(c);
  t.alpha_long.resize(c);
  t.alpha_short.resize(c);
  for (std::size_t i = 0; i < c; ++i) {
    const auto& cell = world.cells[i];
    const Marginal& l = xz[{cell.x, cell.z}];
    const Marginal& s = xs[cell.x];
    t.g_long[i] = l.p > 0.0 ? l.p_target_sum / l.p : 0.0;
    t.g_short[i] = s.p > 0.0 ? s.p_target_sum / s.p : 0.0;
    t.w_long[i] = l.p > 0.0 ? l.q / l.p : 0.0;
    t.w_short[i] = s.p > 0.0 ? s.q / s.p : 0.0;
    const double scale = form == Form::kGeneral ? 1.0 : eta[i];
    t.alpha_long[i] = t.w_long[i] * scale;
    t.alpha_short[i] = t.w_short[i] * scale;
  }

  auto e_p = [&](auto&& f) {
    double acc = 0.0;
    for (std::size_t i = 0; i < c; ++i) acc += world.cells[i].p_source * f(i);
    return acc;
  };
  auto e_q = [&](auto&& f) {
    double acc = 0.0;
    for (std::size_t i = 0; i < c; ++i) acc += world.cells[i].p_target * f(i);
    return acc;
  };

  t.source_loss = e_p([&](std::size_t i) { return loss[i]; });
  t.target_loss = e_q([&](std::size_t i) { return loss[i]; });
  auto dr = [&](const std::vector<double>& g, const std::vector<double>& w) {
    if (form == Form::kGeneral) {
      return e_p([&](std::size_t i) { return w[i] * (loss[i] - g[i]); }) +
             e_q([&](std::size_t i) { return g[i]; });
    }
    const double target = e_q([&](std::size_t i) {
      return log_partition(world.family,
                           std::span<const double>(&eta[i], 1)) -
             eta[i] * g[i];
    });
    return target - e_p([&](std::size_t i) {
             return w[i] * eta[i] * (world.cells[i].y - g[i]);
           });
  };
  t.l_dr_short = dr(t.g_short, t.w_short);
  t.l_dr_long = dr(t.g_long, t.w_long);
  t.ovb = t.l_dr_short - t.l_dr_long;

  t.sigma2 = e_p([&](std::size_t i) { return sq(outcome[i] - t.g_short[i]); });
  t.nu2 = e_p([&](std::size_t i) { return sq(t.alpha_short[i]); });
  const double gap2 =
      e_p([&](std::size_t i) { return sq(t.g_long[i] - t.g_short[i]); });
  const double long_nu2 = e_p([&](std::size_t i) { return sq(t.alpha_long[i]); });
  t.cy = t.sigma2 > 0.0 ? std::sqrt(gap2 / t.sigma2) : 0.0;
  t.cd = t.nu2 > 0.0 ? std::sqrt(std::max(0.0, (long_nu2 - t.nu2) / t.nu2))
                     : 0.0;

  const double mg = e_p([&](std::size_t i) { return t.g_long[i] - t.g_short[i]; });
  const double ma =
      e_p([&](std::size_t i) { return t.alpha_long[i] - t.alpha_short[i]; });
  const double cov = e_p([&](std::size_t i) {
    return (t.g_long[i] - t.g_short[i] - mg) *
           (t.alpha_long[i] - t.alpha_short[i] - ma);
  });
  const double vg =
      e_p([&](std::size_t i) { return sq(t.g_long[i] - t.g_short[i] - mg); });
  const double va = e_p([&](std::size_t i) {
    return sq(t.alpha_long[i] - t.alpha_short[i] - ma);
  });
  t.rho = vg > 0.0 && va > 0.0 ? std::min(1.0, std::abs(cov) / std::sqrt(vg * va))
                               : 0.0;
  t.bound = t.rho * t.cy * t.cd * std::sqrt(t.sigma2) * std::sqrt(t.nu2);
  return t;
}

WorldSample sample_world(const OracleWorld& world, Index n, Index m,
                         std::uint64_t seed) {
  world.validate();
  require(n >= 2 && m >= 2, ErrorKind::kInvalidArgument,
          "sample_world: n and m must be at least 2");
  std::vector<double> cum_p, cum_q;
  double ap = 0.0, aq = 0.0;
  for (const auto& c : world.cells) {
    cum_p.push_back(ap += c.p_source);
    cum_q.push_back(aq += c.p_target);
  }
  WorldSample out;
  auto draw = [&](Index rows, const std::vector<double>& cum,
                  std::uint64_t stream, Matrix& long_x, Matrix& labels,
                  std::vector<std::size_t>& cells) {
    auto rng = make_engine(seed, stream);
    long_x.resize(rows, 2);
    labels.resize(rows, 1);
    cells.resize(static_cast<std::size_t>(rows));
    for (Index i = 0; i < rows; ++i) {
      const std::size_t k = draw_cell(cum, rng);
      const auto& c = world.cells[k];
      cells[i] = k;
      long_x(i, 0) = c.x;
      long_x(i, 1) = c.z;
      labels(i, 0) = c.y;
    }
  };
  Matrix target_labels;
  draw(n, cum_p, 1, out.long_source, out.dataset.source_labels,
       out.source_cells);
  draw(m, cum_q, 2, out.long_target, target_labels, out.target_cells);
  out.dataset.source_features = out.long_source.leftCols(1);
  out.dataset.target_features = out.long_target.leftCols(1);
  out.dataset.target_labels = std::move(target_labels);
  out.dataset.feature_names = {"x"};
  return out;
}

void SynthConfig::validate() const {
  require(d >= 1 && k >= 1 && k <= d, ErrorKind::kInvalidArgument,
          "synth: need 1 <= k <= d");
  require(static_cast<int>(coefficients.size()) == k,
          ErrorKind::kInvalidArgument, "synth: coefficients must have k entries");
  require(static_cast<int>(shift.size()) == d, ErrorKind::kInvalidArgument,
          "synth: shift must have d entries");
  for (int j : omit) {
    require(j >= 0 && j < k, ErrorKind::kInvalidArgument,
            "synth: omitted column outside the label-relevant set");
  }
  std::vector<int> sorted = omit;
  std::sort(sorted.begin(), sorted.end());
  require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
          ErrorKind::kInvalidArgument, "synth: duplicate omitted column");
  require(static_cast<int>(omit.size()) < d, ErrorKind::kInvalidArgument,
          "synth: at least one column must stay observed");
  require(noise_sd >= 0.0, ErrorKind::kInvalidArgument,
          "synth: noise_sd must be non-negative");
  require(n >= 2 && m >= 2, ErrorKind::kInvalidArgument,
          "synth: n and m must be at least 2");
}

std::vector<int> SynthConfig::observed_columns() const {
  std::vector<int> keep;
  for (int j = 0; j < d; ++j) {
    if (std::find(omit.begin(), omit.end(), j) == omit.end()) keep.push_back(j);
  }
  return keep;
}

namespace {

void draw_gaussian_rows(const SynthConfig& config, Index rows, bool target,
                        std::mt19937_64& rng, Matrix& x, Matrix& y) {
  std::normal_distribution<double> normal(0.0, 1.0);
  x.resize(rows, config.d);
  y.resize(rows, 1);
  for (Index i = 0; i < rows; ++i) {
    for (int j = 0; j < config.d; ++j) {
      x(i, j) = normal(rng) + (target ? config.shift[j] : 0.0);
    }
    double label = 0.0;
    for (int j = 0; j < config.k; ++j) label += config.coefficients[j] * x(i, j);
    y(i, 0) = label + config.noise_sd * normal(rng);
  }
}

}  // namespace

GaussianSample sample_gaussian(const SynthConfig& config) {
  config.validate();
  GaussianSample out;
  out.observed = config.observed_columns();
  auto rng_p = make_engine(config.seed, 1);
  auto rng_q = make_engine(config.seed, 2);
  Matrix target_labels;
  draw_gaussian_rows(config, config.n, false, rng_p, out.long_source,
                     out.dataset.source_labels);
  draw_gaussian_rows(config, config.m, true, rng_q, out.long_target,
                     target_labels);
  out.dataset.source_features = select_cols(out.long_source, out.observed);
  out.dataset.target_features = select_cols(out.long_target, out.observed);
  out.dataset.target_labels = std::move(target_labels);
  const auto names = default_feature_names(config.d);
  for (int j : out.observed) out.dataset.feature_names.push_back(names[j]);
  return out;
}

LabeledDraw sample_gaussian_target(const SynthConfig& config, Index rows,
                                   std::uint64_t stream) {
  config.validate();
  require(rows >= 1, ErrorKind::kInvalidArgument,
          "synth: test sample needs at least one row");
  auto rng = make_engine(config.seed, stream);
  LabeledDraw out;
  draw_gaussian_rows(config, rows, true, rng, out.features, out.labels);
  return out;
}

double true_density_ratio(const SynthConfig& config,
                          std::span<const double> x_long) {
  std::vector<int> all(static_cast<std::size_t>(config.d));
  std::iota(all.begin(), all.end(), 0);
  return true_density_ratio(config, x_long, all);
}

double true_density_ratio(const SynthConfig& config,
                          std::span<const double> x_long,
                          std::span<const int> columns) {
  require(static_cast<int>(x_long.size()) == config.d &&
              static_cast<int>(config.shift.size()) == config.d,
          ErrorKind::kShape, "true_density_ratio: dimension mismatch");
  double log_ratio = 0.0;
  for (int j : columns) {
    const double mu = config.shift[j];
    log_ratio += mu * x_long[j] - 0.5 * mu * mu;
  }
  return std::exp(log_ratio);
}

GaussianOracle gaussian_oracle(const SynthConfig& config,
                               const Matrix& long_features) {
  config.validate();
  require(long_features.cols() == config.d, ErrorKind::kShape,
          "gaussian_oracle: expected long features");
  const std::vector<int> observed = config.observed_columns();
  std::vector<int> all(static_cast<std::size_t>(config.d));
  std::iota(all.begin(), all.end(), 0);
  GaussianOracle out;
  const auto rows = static_cast<std::size_t>(long_features.rows());
  out.g_long.resize(rows);
  out.g_short.resize(rows);
  out.w_long.resize(rows);
  out.w_short.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto x = row_span(long_features, static_cast<Index>(i));
    double gl = 0.0, gs = 0.0;
    for (int j = 0; j < config.k; ++j) {
      const double term = config.coefficients[j] * x[j];
      gl += term;
      if (std::find(config.omit.begin(), config.omit.end(), j) ==
          config.omit.end()) {
        gs += term;
      }
    }
    out.g_long[i] = gl;
    out.g_short[i] = gs;
    out.w_long[i] = true_density_ratio(config, x, all);
    out.w_short[i] = true_density_ratio(config, x, observed);
  }
  return out;
}

GaussianTruth gaussian_truth(const SynthConfig& config,
                             std::span<const double> weights, double bias) {
  config.validate();
  const std::vector<int> observed = config.observed_columns();
  require(weights.size() == observed.size(), ErrorKind::kShape,
          "gaussian_truth: one weight per observed column expected");
  require(!config.omit.empty(), ErrorKind::kInvalidArgument,
          "gaussian_truth: no omitted columns");
  double beta2 = 0.0, mu2 = 0.0, beta_mu = 0.0;
  for (int j : config.omit) {
    beta2 += sq(config.coefficients[j]);
    mu2 += sq(config.shift[j]);
    beta_mu += config.coefficients[j] * config.shift[j];
  }
  // Observed-column moments: E_P[w_S eta] is eta's mean under the shifted
  // law, and E_P[w_S^2 eta^2] = exp(|mu_obs|^2) E_{N(2 mu_obs, I)}[eta^2].
  double mean_q = bias, mean_2q = bias, w2 = 0.0, mu_obs2 = 0.0;
  for (std::size_t t = 0; t < observed.size(); ++t) {
    const double mu = config.shift[observed[t]];
    mean_q += weights[t] * mu;
    mean_2q += weights[t] * 2.0 * mu;
    w2 += sq(weights[t]);
    mu_obs2 += sq(mu);
  }
  GaussianTruth t;
  t.sigma2 = beta2 + sq(config.noise_sd);
  t.nu2 = std::exp(mu_obs2) * (sq(mean_2q) + w2);
  require(t.nu2 > 0.0, ErrorKind::kInvalidArgument,
          "gaussian_truth: eta is identically zero");
  t.cy = std::sqrt(beta2 / t.sigma2);
  const double cd2 = std::expm1(mu2);
  t.cd = std::sqrt(cd2);
  const double denom = std::sqrt(beta2 * t.nu2 * cd2);
  t.rho = denom > 0.0 ? std::min(1.0, std::abs(mean_q * beta_mu) / denom) : 0.0;
  return t;
}

std::vector<int> random_omit_mask(int k, std::uint64_t seed, int count) {
  require(k >= 2, ErrorKind::kInvalidArgument,
          "random_omit_mask: need at least 2 label-relevant features");
  require(count >= 0 && count < k, ErrorKind::kInvalidArgument,
          "random_omit_mask: count must lie in [1, k-1]");
  auto rng = make_engine(seed, 102);
  const auto drawn =
      1 + static_cast<int>(rng() % static_cast<std::uint64_t>(k - 1));
  if (count == 0) count = drawn;
  std::vector<int> idx(static_cast<std::size_t>(k));
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates with an explicit draw so the mask is portable.
  for (int i = 0; i < count; ++i) {
    const auto span = static_cast<std::uint64_t>(k - i);
    const int j = i + static_cast<int>(rng() % span);
    std::swap(idx[i], idx[j]);
  }
  std::vector<int> omit(idx.begin(), idx.begin() + count);
  std::sort(omit.begin(), omit.end());
  return omit;
}

SynthConfig amazon_protocol_config(std::uint64_t seed, Index n, Index m,
                                   double delta, int omit_count) {
  SynthConfig c;
  c.d = 10;
  c.k = 10;
  c.noise_sd = 0.5;
  c.n = n;
  c.m = m;
  c.seed = seed;
  auto rng = make_engine(seed, 101);
  std::normal_distribution<double> normal(0.0, 1.0);
  c.coefficients.resize(10);
  for (auto& b : c.coefficients) b = normal(rng);
  c.omit = random_omit_mask(c.k, seed, omit_count);
  c.shift.assign(10, 0.0);
  for (int j = 0; j < c.k; ++j) {
    const bool hidden = std::find(c.omit.begin(), c.omit.end(), j) != c.omit.end();
    const double sign = c.coefficients[j] >= 0.0 ? 1.0 : -1.0;
    c.shift[j] = (hidden ? -delta : delta) * sign;
  }
  return c;
}

SynthConfig strong_omission_config(std::uint64_t seed, Index n, Index m) {
  return amazon_protocol_config(seed, n, m, 0.4, 3);
}

}  // namespace ovb
