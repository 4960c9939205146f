#include "ovb/serialize.h"

#include <fstream>
#include <sstream>

#include "ovb/error.h"

namespace ovb {
namespace {

Json row_to_json(const Eigen::RowVectorXd& v) {
  return Json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::RowVectorXd row_from_json(const Json& j) {
  const auto values = j.get<std::vector<double>>();
  Eigen::RowVectorXd v(static_cast<Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v(static_cast<Index>(i)) = values[i];
  return v;
}

Json vector_to_json(const Vector& v) {
  return Json(std::vector<double>(v.data(), v.data() + v.size()));
}

Vector vector_from_json(const Json& j) {
  return row_from_json(j).transpose();
}

LossFamily family_from(const Json& j) {
  return LossFamily::from_name(j.at("name").get<std::string>(),
                               j.value("classes", 2), j.value("max_steps", 1));
}

std::string outcome_kind_name(OutcomeKind k) {
  return k == OutcomeKind::kRidge ? "ridge" : "net";
}
std::string mode_name(TargetMode m) {
  return m == TargetMode::kPredictsLabel ? "predicts_label" : "predicts_loss";
}
std::string link_name(OutputLink l) {
  switch (l) {
    case OutputLink::kIdentity: return "identity";
    case OutputLink::kLogistic: return "logistic";
    case OutputLink::kSoftmax: return "softmax";
  }
  return "identity";
}

template <typename T>
T parse_enum(const std::string& name,
             std::initializer_list<std::pair<const char*, T>> table) {
  for (const auto& [text, value] : table) {
    if (name == text) return value;
  }
  fail(ErrorKind::kData, "unknown enum value '" + name + "' in JSON");
}

}  // namespace

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    const auto r = row_span(m, i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Matrix matrix_from_json(const Json& j) {
  const auto rows = j.at("rows").get<Index>();
  const auto cols = j.at("cols").get<Index>();
  const Json& data = j.at("data");
  require(static_cast<Index>(data.size()) == rows, ErrorKind::kData,
          "matrix JSON: row count mismatch");
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto r = data[static_cast<std::size_t>(i)].get<std::vector<double>>();
    require(static_cast<Index>(r.size()) == cols, ErrorKind::kData,
            "matrix JSON: column count mismatch");
    for (Index k = 0; k < cols; ++k) m(i, k) = r[static_cast<std::size_t>(k)];
  }
  return m;
}

void to_json(Json& j, const LossFamily& family) {
  j = Json{{"name", family.name()},
           {"classes", family.classes()},
           {"max_steps", family.max_steps()}};
}

void from_json(const Json& j, LossFamily& family) { family = family_from(j); }

void to_json(Json& j, const LinearModel& model) {
  j = Json{{"kind", "linear_model"},
           {"family", model.family},
           {"weights", matrix_to_json(model.weights)},
           {"bias", vector_to_json(model.bias)}};
}

void from_json(const Json& j, LinearModel& model) {
  require(j.value("kind", "") == "linear_model", ErrorKind::kData,
          "JSON is not a linear model");
  model.family = family_from(j.at("family"));
  model.weights = matrix_from_json(j.at("weights"));
  model.bias = vector_from_json(j.at("bias"));
  require(model.weights.cols() == model.family.width() &&
              model.bias.size() == model.family.width(),
          ErrorKind::kData, "linear model JSON: shape does not match family");
}

void to_json(Json& j, const OutcomeModel& m) {
  j = Json{{"kind", outcome_kind_name(m.kind)},
           {"mode", mode_name(m.mode)},
           {"link", link_name(m.link)},
           {"input_dim", m.input_dim},
           {"output_dim", m.output_dim},
           {"seed", m.seed},
           {"lambda", m.lambda},
           {"iterations", m.iterations}};
  if (m.kind == OutcomeKind::kRidge) {
    j["coef"] = matrix_to_json(m.coef);
    j["intercept"] = row_to_json(m.intercept);
  } else {
    j["input_mean"] = row_to_json(m.input_mean);
    j["input_scale"] = row_to_json(m.input_scale);
    j["hidden_weights"] = matrix_to_json(m.hidden_weights);
    j["hidden_bias"] = row_to_json(m.hidden_bias);
    j["output_weights"] = matrix_to_json(m.output_weights);
    j["output_bias"] = row_to_json(m.output_bias);
    j["target_mean"] = row_to_json(m.target_mean);
    j["target_scale"] = row_to_json(m.target_scale);
  }
}

void from_json(const Json& j, OutcomeModel& m) {
  m.kind = parse_enum<OutcomeKind>(
      j.at("kind").get<std::string>(),
      {{"ridge", OutcomeKind::kRidge}, {"net", OutcomeKind::kNet}});
  m.mode = parse_enum<TargetMode>(
      j.at("mode").get<std::string>(),
      {{"predicts_label", TargetMode::kPredictsLabel},
       {"predicts_loss", TargetMode::kPredictsLoss}});
  m.link = parse_enum<OutputLink>(j.at("link").get<std::string>(),
                                  {{"identity", OutputLink::kIdentity},
                                   {"logistic", OutputLink::kLogistic},
                                   {"softmax", OutputLink::kSoftmax}});
  m.input_dim = j.at("input_dim").get<Index>();
  m.output_dim = j.at("output_dim").get<Index>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.lambda = j.at("lambda").get<double>();
  m.iterations = j.at("iterations").get<int>();
  if (m.kind == OutcomeKind::kRidge) {
    m.coef = matrix_from_json(j.at("coef"));
    m.intercept = row_from_json(j.at("intercept"));
  } else {
    m.input_mean = row_from_json(j.at("input_mean"));
    m.input_scale = row_from_json(j.at("input_scale"));
    m.hidden_weights = matrix_from_json(j.at("hidden_weights"));
    m.hidden_bias = row_from_json(j.at("hidden_bias"));
    m.output_weights = matrix_from_json(j.at("output_weights"));
    m.output_bias = row_from_json(j.at("output_bias"));
    m.target_mean = row_from_json(j.at("target_mean"));
    m.target_scale = row_from_json(j.at("target_scale"));
  }
}

void to_json(Json& j, const DensityRatioModel& m) {
  j = Json{{"kind", "density_ratio"},
           {"coef", vector_to_json(m.coef)},
           {"intercept", m.intercept},
           {"prior_correction", m.prior_correction},
           {"clip", {m.clip.lo, m.clip.hi}},
           {"lambda", m.lambda},
           {"seed", m.seed},
           {"separable", m.separable}};
}

void from_json(const Json& j, DensityRatioModel& m) {
  m.coef = vector_from_json(j.at("coef"));
  m.intercept = j.at("intercept").get<double>();
  m.prior_correction = j.at("prior_correction").get<double>();
  m.clip.lo = j.at("clip").at(0).get<double>();
  m.clip.hi = j.at("clip").at(1).get<double>();
  m.lambda = j.at("lambda").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.separable = j.at("separable").get<bool>();
}

void to_json(Json& j, const SynthConfig& c) {
  j = Json{{"d", c.d},
           {"k", c.k},
           {"coefficients", c.coefficients},
           {"omit", c.omit},
           {"shift", c.shift},
           {"noise_sd", c.noise_sd},
           {"n", c.n},
           {"m", c.m},
           {"seed", c.seed}};
}

void from_json(const Json& j, SynthConfig& c) {
  c.d = j.at("d").get<int>();
  c.k = j.at("k").get<int>();
  c.coefficients = j.at("coefficients").get<std::vector<double>>();
  c.omit = j.at("omit").get<std::vector<int>>();
  c.shift = j.at("shift").get<std::vector<double>>();
  c.noise_sd = j.at("noise_sd").get<double>();
  c.n = j.at("n").get<Index>();
  c.m = j.at("m").get<Index>();
  c.seed = j.at("seed").get<std::uint64_t>();
}

void to_json(Json& j, const EvalReport& r) {
  j = Json{{"form", form_name(r.form)},
           {"unadjusted", r.unadjusted},
           {"ipw", r.ipw},
           {"dr", r.dr},
           {"sigma2", r.sigma2},
           {"nu2", r.nu2},
           {"nu2_loss_based", r.nu2_loss_based},
           {"n_main", r.n_main},
           {"m_main", r.m_main}};
  j["test_loss"] = r.test_loss ? Json(*r.test_loss) : Json(nullptr);
}

void to_json(Json& j, const WorstCaseReport& r) {
  Json budget{{"s", r.budget.s()}};
  if (r.budget.has_components()) {
    budget["rho_max"] = *r.budget.rho_max();
    budget["cy_max"] = *r.budget.cy_max();
    budget["cd_max"] = *r.budget.cd_max();
  }
  j = Json{{"l_dr_s", r.l_dr_s},
           {"sigma", r.sigma},
           {"nu", r.nu},
           {"bound_term", r.bound_term},
           {"worst_case", r.worst_case},
           {"best_case", r.best_case},
           {"ci", {r.ci_low, r.ci_high}},
           {"budget", budget}};
}

void to_json(Json& j, const SensitivityEstimate& e) {
  j = Json{{"cy", e.cy},
           {"cd", e.cd},
           {"rho", e.rho},
           {"s", e.product()},
           {"source", source_name(e.source)},
           {"degenerate", e.degenerate}};
}

void to_json(Json& j, const SensitivityRange& r) {
  j = Json{{"point", r.point},
           {"low", r.low},
           {"high", r.high},
           {"signed_low", r.signed_low},
           {"signed_high", r.signed_high},
           {"paired", r.paired}};
}

void to_json(Json& j, const OptTrace& t) {
  j = Json{{"status", status_name(t.status)},
           {"iterations", t.iterations},
           {"objective", t.objective},
           {"grad_norm", t.grad_norm}};
}

void to_json(Json& j, const OracleWorld& w) {
  Json cells = Json::array();
  for (const auto& c : w.cells) {
    cells.push_back(Json{{"x", c.x},
                         {"z", c.z},
                         {"y", c.y},
                         {"p_source", c.p_source},
                         {"p_target", c.p_target}});
  }
  j = Json{{"name", w.name},
           {"family", w.family},
           {"cells", cells},
           {"slope", w.slope},
           {"bias", w.bias}};
}

void to_json(Json& j, const TruthRecord& t) {
  j = Json{{"form", form_name(t.form)},
           {"source_loss", t.source_loss},
           {"target_loss", t.target_loss},
           {"l_dr_short", t.l_dr_short},
           {"l_dr_long", t.l_dr_long},
           {"ovb", t.ovb},
           {"sigma2", t.sigma2},
           {"nu2", t.nu2},
           {"cy", t.cy},
           {"cd", t.cd},
           {"rho", t.rho},
           {"bound", t.bound}};
}

void save_json(const std::string& path, Json doc) {
  doc["schema_version"] = kSchemaVersion;
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::kData,
          path + ": cannot open for writing");
  out << doc.dump(2) << '\n';
  require(static_cast<bool>(out), ErrorKind::kData, path + ": write failed");
}

Json load_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kData, path + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  Json doc = Json::parse(buf.str(), nullptr, false);
  require(!doc.is_discarded(), ErrorKind::kData, path + ": malformed JSON");
  require(doc.value("schema_version", 0) == kSchemaVersion,
          ErrorKind::kInvalidArgument,
          path + ": unsupported schema_version");
  return doc;
}

}  // namespace ovb
