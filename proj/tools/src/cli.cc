#include "cli.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "config.h"
#include "ovb/bounds.h"
#include "ovb/csv.h"
#include "ovb/estimators.h"
#include "ovb/nuisance.h"
#include "ovb/numeric.h"
#include "ovb/robust_opt.h"
#include "ovb/serialize.h"
#include "ovb/synthlab.h"

namespace ovb::cli {
namespace fs = std::filesystem;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return kExitConfig;
    case ErrorKind::kShape:
    case ErrorKind::kData: return kExitData;
    case ErrorKind::kNumerical: return kExitNumerical;
  }
  return kExitConfig;
}

namespace {

struct Args {
  std::string command;
  std::string config_path;
  std::vector<std::string> data;
  std::vector<std::string> data_long;
  std::string model_path;
  std::string benchmark_path;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
};

class Run {
 public:
  Run(const Args& args, std::ostream& log) : args_(args), log_(log) {
    cfg_ = args.config_path.empty() ? Config::parse("")
                                    : Config::load(args.config_path);
    if (args.seed) cfg_.set("seed", std::to_string(*args.seed));
    family_ = LossFamily::from_name(cfg_.str("family"),
                                    static_cast<int>(cfg_.integer("classes")));
    fs::create_directories(args.out);
  }

  void synth();
  void evaluate();
  void optimize();
  void sweep_cmd();
  void benchmark();

 private:
  std::string out_path(const std::string& name) const {
    return (fs::path(args_.out) / name).string();
  }

  Json provenance() const {
    Json data = Json::array();
    for (const auto* list : {&args_.data, &args_.data_long}) {
      for (const auto& p : *list) {
        data.push_back({{"path", p}, {"digest", file_digest(p)}});
      }
    }
    Json j{{"command", args_.command},
           {"version", OVB_VERSION},
           {"config_hash", cfg_.hash()},
           {"seed", cfg_.seed()},
           {"data", data}};
    if (!args_.model_path.empty()) {
      j["model"] = {{"path", args_.model_path},
                    {"digest", file_digest(args_.model_path)}};
    }
    return j;
  }

  ShiftDataset load_dataset(const std::vector<std::string>& paths,
                            const char* flag) const {
    require(!paths.empty(), ErrorKind::kInvalidArgument,
            std::string("missing input: pass ") + flag + " <csv>");
    std::vector<CsvTable> parts;
    for (const auto& p : paths) parts.push_back(read_csv_table(p));
    const CsvTable table = concat_tables(parts);
    ShiftDataset ds = to_shift_dataset(table, family_);
    ds.validate(family_);
    return ds;
  }

  NuisanceConfig nuisance_config() const {
    NuisanceConfig nc;
    nc.holdout_frac = cfg_.num("holdout_frac");
    nc.clip = {cfg_.num("clip_lo"), cfg_.num("clip_hi")};
    require(nc.clip.lo > 0.0 && nc.clip.lo < nc.clip.hi,
            ErrorKind::kInvalidArgument,
            "config: need 0 < clip_lo < clip_hi");
    const std::string kind = cfg_.str("nuisance");
    require(kind == "ridge" || kind == "net", ErrorKind::kInvalidArgument,
            "config: nuisance must be ridge or net");
    nc.outcome.kind = kind == "ridge" ? OutcomeKind::kRidge : OutcomeKind::kNet;
    nc.outcome.ridge_lambda = cfg_.opt_num("ridge_lambda");
    nc.outcome.net_width = static_cast<int>(cfg_.integer("net_width"));
    nc.outcome.net_max_iters = static_cast<int>(cfg_.integer("net_max_iters"));
    nc.outcome.net_step = cfg_.num("net_step");
    nc.seed = cfg_.seed();
    return nc;
  }

  SensitivityBudget budget() const {
    const bool any = cfg_.has("rho_max") || cfg_.has("cy_max") ||
                     cfg_.has("cd_max");
    if (!any) return SensitivityBudget::from_product(cfg_.num("s"));
    for (const char* k : {"rho_max", "cy_max", "cd_max"}) {
      cfg_.require_key(k, "component budgets need rho_max, cy_max and cd_max");
    }
    return SensitivityBudget::from_components(
        cfg_.num("rho_max"), cfg_.num("cy_max"), cfg_.num("cd_max"));
  }

  BootstrapOptions bootstrap_options() const {
    BootstrapOptions o;
    o.replicates = static_cast<int>(cfg_.integer("bootstrap_replicates"));
    o.level = cfg_.num("level");
    o.seed = mix_seed(cfg_.seed(), 31);
    return o;
  }

  OptConfig opt_config() const {
    OptConfig o;
    o.objective = objective_from_name(cfg_.str("objective"));
    o.method = method_from_name(cfg_.str("method"));
    o.step_size = cfg_.num("step_size");
    o.max_iters = static_cast<int>(cfg_.integer("max_iters"));
    o.grad_tol = cfg_.num("grad_tol");
    o.seed = cfg_.seed();
    o.s = budget().s();
    o.validate();
    return o;
  }

  // Model from --model, else from model_weights/model_bias, else nullopt.
  std::optional<LinearModel> given_model(Index d) const {
    std::optional<LinearModel> model;
    if (!args_.model_path.empty()) {
      Json j = load_json(args_.model_path);
      LinearModel m;
      from_json(j.contains("model") ? j.at("model") : j, m);
      model = m;
    } else if (cfg_.has("model_weights")) {
      LinearModel m = LinearModel::zeros(family_, d);
      const auto w = cfg_.num_list("model_weights");
      require(static_cast<Index>(w.size()) == m.weights.size(),
              ErrorKind::kInvalidArgument,
              "config: model_weights needs d * width entries");
      Vector theta = Vector::Zero(m.num_params());
      for (std::size_t i = 0; i < w.size(); ++i) theta(static_cast<Index>(i)) = w[i];
      const auto b = cfg_.num_list("model_bias");
      require(b.empty() || static_cast<Index>(b.size()) == m.bias.size(),
              ErrorKind::kInvalidArgument,
              "config: model_bias needs width entries");
      for (std::size_t i = 0; i < b.size(); ++i) {
        theta(m.weights.size() + static_cast<Index>(i)) = b[i];
      }
      m.set_flat(theta);
      model = m;
    }
    if (model) {
      require(model->family == family_, ErrorKind::kInvalidArgument,
              "model family does not match config family");
      require(model->input_dim() == d, ErrorKind::kShape,
              "model feature dimension does not match the data");
    }
    return model;
  }

  LinearModel model_or_fit(const ShiftDataset& ds, const GlmProblem* problem,
                           Json& report) const {
    if (auto m = given_model(ds.d())) {
      report["model_source"] = args_.model_path.empty() ? "config" : "file";
      return *m;
    }
    require(problem != nullptr, ErrorKind::kInvalidArgument,
            "general form needs a model: pass --model or model_weights");
    const FitResult r = fit(*problem, opt_config());
    report["model_source"] = "trained:" + cfg_.str("objective");
    report["trace"] = r.trace;
    return r.model;
  }

  static Json nuisance_summary(const NuisanceSet& nus) {
    return Json{{"outcome", nus.outcome},
                {"ratio", nus.ratio},
                {"folds",
                 {{"nuisance_source", nus.folds.nuisance_source.size()},
                  {"main_source", nus.folds.main_source.size()},
                  {"nuisance_target", nus.folds.nuisance_target.size()},
                  {"main_target", nus.folds.main_target.size()}}}};
  }

  void write_synth_tables(const std::vector<std::string>& short_names,
                          const Matrix& src_short, const Matrix& tgt_short,
                          const std::vector<std::string>& long_names,
                          const Matrix& src_long, const Matrix& tgt_long,
                          const Matrix& y_src, const Matrix& y_tgt) const {
    std::vector<double> ys(y_src.data(), y_src.data() + y_src.size());
    std::vector<double> yt(y_tgt.data(), y_tgt.data() + y_tgt.size());
    auto write = [&](const std::string& name,
                     const std::vector<std::string>& names, const Matrix& x,
                     const std::vector<double>& y, bool source) {
      const Matrix none(0, x.cols());
      const CsvTable t = source ? make_table(names, x, y, none, {})
                                : make_table(names, none, {}, x, y);
      write_csv_table(out_path(name), t);
    };
    write("source.csv", short_names, src_short, ys, true);
    write("target.csv", short_names, tgt_short, yt, false);
    write("source_long.csv", long_names, src_long, ys, true);
    write("target_long.csv", long_names, tgt_long, yt, false);
  }

  EstimandRows general_form_rows(const ShiftDataset& ds,
                                 const LinearModel& model,
                                 NuisanceSet& nus_out) const {
    const NuisanceConfig nc = nuisance_config();
    const FoldPlan folds = split_folds(ds, nc.holdout_frac, nc.seed);
    const std::vector<double> losses =
        row_losses(family_, model.eta(ds.source_features), ds.source_labels);
    Matrix targets(ds.n(), 1);
    for (Index i = 0; i < ds.n(); ++i) targets(i, 0) = losses[i];
    nus_out = fit_nuisances(ds, folds, targets, TargetMode::kPredictsLoss,
                            OutputLink::kIdentity, nc);
    const Matrix xp = select_rows(ds.source_features, folds.main_source);
    const Matrix xq = select_rows(ds.target_features, folds.main_target);
    const Matrix gp = nus_out.outcome.predict(xp);
    const Matrix gq = nus_out.outcome.predict(xq);
    const Vector wp = nus_out.ratio.predict(xp).weights;
    const Vector wq = nus_out.ratio.predict(xq).weights;
    std::vector<double> lp;
    for (auto i : folds.main_source) lp.push_back(losses[i]);
    std::vector<double> lq;
    if (ds.target_labels) {
      lq = row_losses(family_, model.eta(xq),
                      select_rows(*ds.target_labels, folds.main_target));
    }
    return general_rows(lp, std::span<const double>(gp.data(), gp.size()),
                        as_span(wp),
                        std::span<const double>(gq.data(), gq.size()),
                        as_span(wq), lq);
  }

  const Args& args_;
  std::ostream& log_;
  Config cfg_ = Config::parse("");
  LossFamily family_ = LossFamily::regression();
};

void Run::synth() {
  const std::string world = cfg_.str("world");
  const Index n = cfg_.integer("n");
  const Index m = cfg_.integer("m");
  const std::uint64_t seed = cfg_.seed();
  Json doc{{"provenance", provenance()}};
  if (world == "w1" || world == "w2" || world == "no_shift") {
    const OracleWorld w = world == "w1"   ? oracle_w1()
                          : world == "w2" ? oracle_w2()
                                          : oracle_no_shift();
    const WorldSample s = sample_world(w, n, m, seed);
    write_synth_tables({"x"}, s.dataset.source_features,
                       s.dataset.target_features, {"x", "z"}, s.long_source,
                       s.long_target, s.dataset.source_labels,
                       *s.dataset.target_labels);
    doc["world"] = w;
    doc["truth"] = {{"glm", enumerate_truth(w, Form::kGlm)},
                    {"general", enumerate_truth(w, Form::kGeneral)}};
  } else if (world == "gaussian" || world == "amazon" ||
             world == "strong_omission") {
    SynthConfig c;
    if (world == "gaussian") {
      cfg_.require_key("coefficients", "world=gaussian needs k coefficients");
      c.d = static_cast<int>(cfg_.integer("d"));
      c.k = static_cast<int>(cfg_.integer("k"));
      c.coefficients = cfg_.num_list("coefficients");
      c.omit = cfg_.int_list("omit");
      c.shift = cfg_.num_list("shift");
      if (c.shift.empty()) c.shift.assign(static_cast<std::size_t>(c.d), 0.0);
      c.noise_sd = cfg_.num("noise_sd");
      c.n = n;
      c.m = m;
      c.seed = seed;
    } else if (world == "amazon") {
      c = amazon_protocol_config(seed, n, m, cfg_.num("delta"),
                                 static_cast<int>(cfg_.integer("omit_count")));
    } else {
      c = strong_omission_config(seed, n, m);
    }
    const GaussianSample s = sample_gaussian(c);
    write_synth_tables(s.dataset.feature_names, s.dataset.source_features,
                       s.dataset.target_features, default_feature_names(c.d),
                       s.long_source, s.long_target, s.dataset.source_labels,
                       *s.dataset.target_labels);
    doc["synth_config"] = c;
    doc["observed_columns"] = s.observed;
  } else {
    fail(ErrorKind::kInvalidArgument,
         "config: unknown world '" + world +
             "' (expected w1, w2, no_shift, gaussian, amazon, "
             "strong_omission)");
  }
  save_json(out_path("world.json"), doc);
  log_ << "wrote " << out_path("source.csv") << " and "
       << out_path("target.csv") << "\n";
}

void Run::evaluate() {
  const ShiftDataset ds = load_dataset(args_.data, "--data");
  const Form form = form_from_name(cfg_.str("form"));
  const SensitivityBudget b = budget();
  Json report{{"provenance", provenance()}, {"family", family_}};
  EstimandRows rows;
  NuisanceSet nus;
  LinearModel model;
  if (form == Form::kGlm) {
    nus = fit_glm_nuisances(ds, family_, nuisance_config());
    const GlmProblem problem = make_glm_problem(ds, family_, nus);
    model = model_or_fit(ds, &problem, report);
    rows = model_rows(model, problem);
  } else {
    model = model_or_fit(ds, nullptr, report);
    rows = general_form_rows(ds, model, nus);
  }
  const EvalReport ev = rows.report();
  report["model"] = model;
  report["nuisances"] = nuisance_summary(nus);
  report["eval"] = ev;
  report["worst_case"] = worst_case_report(rows, b, bootstrap_options());
  if (ev.test_loss) {
    const double scale = ev.sigma() * ev.nu();
    if (scale > 0.0) {
      report["inferred_s"] =
          infer_sensitivity(*ev.test_loss, ev.dr, ev.sigma(), ev.nu());
      report["inferred_s_range"] =
          infer_sensitivity_range(rows, bootstrap_options());
    } else {
      report["inferred_s"] = nullptr;
    }
  }
  save_json(out_path("report.json"), report);
  log_ << "dr " << format_double(ev.dr) << " worst_case "
       << format_double(report["worst_case"]["worst_case"].get<double>())
       << "\n";
}

void Run::optimize() {
  require(form_from_name(cfg_.str("form")) == Form::kGlm,
          ErrorKind::kInvalidArgument,
          "optimize supports form=glm only (general form is evaluation-only)");
  const ShiftDataset ds = load_dataset(args_.data, "--data");
  const NuisanceSet nus = fit_glm_nuisances(ds, family_, nuisance_config());
  const GlmProblem problem = make_glm_problem(ds, family_, nus);
  const OptConfig oc = opt_config();
  const FitResult r = fit(problem, oc);
  const SensitivityBudget b = budget();
  const EstimandRows rows = model_rows(r.model, problem);
  Json report{{"provenance", provenance()},
              {"objective", objective_name(oc.objective)},
              {"method", method_name(oc.method)},
              {"s", oc.s},
              {"trace", r.trace},
              {"model", r.model},
              {"nuisances", nuisance_summary(nus)},
              {"eval", rows.report()},
              {"worst_case", worst_case_report(rows, b, bootstrap_options())}};
  save_json(out_path("model.json"),
            Json{{"model", r.model}, {"config_hash", cfg_.hash()}});
  save_json(out_path("report.json"), report);
  log_ << objective_name(oc.objective) << " fit: "
       << status_name(r.trace.status) << " after " << r.trace.iterations
       << " iterations\n";
}

void Run::sweep_cmd() {
  require(form_from_name(cfg_.str("form")) == Form::kGlm,
          ErrorKind::kInvalidArgument, "sweep supports form=glm only");
  std::vector<double> grid = cfg_.num_list("s_grid");
  if (grid.empty()) {
    if (!cfg_.has("s_grid_max")) {
      cfg_.require_key("s_grid", "or set s_grid_max and s_grid_points");
    }
    const double hi = cfg_.num("s_grid_max");
    const auto pts = cfg_.integer("s_grid_points");
    require(pts >= 2, ErrorKind::kInvalidArgument,
            "config: s_grid_points must be at least 2");
    for (long long i = 0; i < pts; ++i) {
      grid.push_back(hi * static_cast<double>(i) / static_cast<double>(pts - 1));
    }
  }
  const ShiftDataset ds = load_dataset(args_.data, "--data");
  const NuisanceSet nus = fit_glm_nuisances(ds, family_, nuisance_config());
  const GlmProblem problem = make_glm_problem(ds, family_, nus);
  std::optional<TestSet> test;
  if (problem.target_labels) {
    test = TestSet{problem.target_features, *problem.target_labels};
  }
  const auto rows = sweep(problem, grid, opt_config(), test);

  std::ofstream csv(out_path("sweep.csv"), std::ios::binary);
  require(static_cast<bool>(csv), ErrorKind::kData,
          out_path("sweep.csv") + ": cannot open for writing");
  csv << "s,status,l_dr_s,sigma,nu,worst_case,best_case,ci_low,ci_high,"
         "worst_case_at_dr_model,test_loss\n";
  Json errors = Json::array();
  for (const auto& r : rows) {
    csv << format_double(r.s) << ',' << (r.ok ? status_name(r.trace.status)
                                               : std::string("error"));
    if (r.ok) {
      const WorstCaseReport wc =
          worst_case_report(model_rows(r.model, problem),
                            SensitivityBudget::from_product(r.s),
                            bootstrap_options());
      for (double v : {r.l_dr_s, r.sigma, r.nu, r.worst_case, r.best_case,
                       wc.ci_low, wc.ci_high}) {
        csv << ',' << format_double(v);
      }
    } else {
      csv << ",,,,,,,";
      errors.push_back({{"s", r.s}, {"error", r.error}});
    }
    csv << ',' << format_double(r.worst_case_at_dr_model) << ',';
    if (r.test_loss) csv << format_double(*r.test_loss);
    csv << '\n';
  }
  Json meta{{"provenance", provenance()}, {"s_grid", grid}, {"errors", errors}};
  std::string bench = args_.benchmark_path;
  if (bench.empty()) bench = cfg_.str("benchmark_report");
  if (!bench.empty()) {
    const Json b = load_json(bench);
    meta["benchmark_s"] = b.at("estimate").at("s");
    meta["benchmark_report"] = {{"path", bench}, {"digest", file_digest(bench)}};
  } else {
    meta["benchmark_s"] = nullptr;
  }
  save_json(out_path("sweep_meta.json"), meta);
  log_ << "wrote " << rows.size() << " sweep rows to " << out_path("sweep.csv")
       << "\n";
}

void Run::benchmark() {
  const ShiftDataset shrt = load_dataset(args_.data, "--data");
  const ShiftDataset lng = load_dataset(args_.data_long, "--data-long");
  require(shrt.n() == lng.n() && shrt.m() == lng.m(), ErrorKind::kData,
          "short and long data must have the same rows");
  require((shrt.source_labels - lng.source_labels).cwiseAbs().maxCoeff() == 0.0,
          ErrorKind::kData, "short and long data disagree on source labels");
  std::vector<int> cols;
  for (const auto& name : shrt.feature_names) {
    const auto it =
        std::find(lng.feature_names.begin(), lng.feature_names.end(), name);
    require(it != lng.feature_names.end(), ErrorKind::kData,
            "short feature '" + name + "' is missing from the long data");
    cols.push_back(static_cast<int>(it - lng.feature_names.begin()));
  }
  const Form form = form_from_name(cfg_.str("form"));
  Json report{{"provenance", provenance()}, {"form", form_name(form)}};
  std::optional<GlmProblem> problem;
  if (!given_model(shrt.d())) {
    const NuisanceSet nus = fit_glm_nuisances(shrt, family_, nuisance_config());
    problem = make_glm_problem(shrt, family_, nus);
  }
  const LinearModel model =
      model_or_fit(shrt, problem ? &*problem : nullptr, report);
  BenchmarkInputs in;
  in.family = family_;
  in.form = form;
  in.long_source = lng.source_features;
  in.long_target = lng.target_features;
  in.short_columns = cols;
  in.source_labels = shrt.source_labels;
  in.config = nuisance_config();
  const Matrix eta = model.eta(shrt.source_features);
  if (form == Form::kGlm) {
    in.eta_source = eta;
  } else {
    in.source_losses = row_losses(family_, eta, shrt.source_labels);
  }
  const SensitivityEstimate est = benchmark_sensitivity(in);
  report["model"] = model;
  report["short_columns"] = cols;
  report["estimate"] = est;
  save_json(out_path("benchmark.json"), report);
  log_ << "benchmarked s " << format_double(est.product()) << "\n";
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  Args args;
  CLI::App app{"ovb: worst-case target loss under omitted variables"};
  app.require_subcommand(1);
  app.set_version_flag("--version", OVB_VERSION);

  auto add_common = [&](CLI::App* sub, bool data) {
    sub->add_option("--config", args.config_path, "key=value config file")
        ->check(CLI::ExistingFile);
    sub->add_option("--out", args.out, "output directory")
        ->capture_default_str();
    sub->add_option("--seed", args.seed, "overrides the config seed");
    if (data) {
      sub->add_option("--data", args.data,
                      "dataset CSV (repeatable; rows are concatenated)");
      sub->add_option("--model", args.model_path,
                      "trained model JSON to evaluate");
    }
  };
  auto* synth = app.add_subcommand(
      "synth", "sample a synthetic world into source/target CSVs");
  add_common(synth, false);
  auto* eval = app.add_subcommand(
      "evaluate", "estimate target loss, bound and confidence interval");
  add_common(eval, true);
  auto* opt = app.add_subcommand("optimize", "train a linear model");
  add_common(opt, true);
  auto* sw = app.add_subcommand(
      "sweep", "train one model per sensitivity value in s_grid");
  add_common(sw, true);
  sw->add_option("--benchmark", args.benchmark_path,
                 "benchmark.json whose s is echoed in sweep_meta.json");
  auto* bench = app.add_subcommand(
      "benchmark", "estimate sensitivity parameters from a proxy long model");
  add_common(bench, true);
  bench->add_option("--data-long", args.data_long,
                    "long-feature dataset CSV (repeatable)")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    args.command = app.get_subcommands().front()->get_name();
    Run run(args, out);
    if (args.command == "synth") run.synth();
    if (args.command == "evaluate") run.evaluate();
    if (args.command == "optimize") run.optimize();
    if (args.command == "sweep") run.sweep_cmd();
    if (args.command == "benchmark") run.benchmark();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace ovb::cli
