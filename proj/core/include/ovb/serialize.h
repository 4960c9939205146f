#ifndef OVB_SERIALIZE_H_
#define OVB_SERIALIZE_H_

// JSON forms of models, reports and synthetic worlds. Every top-level
// document written by save_json carries "schema_version".

#include <string>

#include <nlohmann/json.hpp>

#include "ovb/bounds.h"
#include "ovb/estimators.h"
#include "ovb/nuisance.h"
#include "ovb/robust_opt.h"
#include "ovb/synthlab.h"

namespace ovb {

inline constexpr int kSchemaVersion = 1;

using Json = nlohmann::json;

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

void to_json(Json& j, const LossFamily& family);
void from_json(const Json& j, LossFamily& family);
void to_json(Json& j, const LinearModel& model);
void from_json(const Json& j, LinearModel& model);
void to_json(Json& j, const OutcomeModel& model);
void from_json(const Json& j, OutcomeModel& model);
void to_json(Json& j, const DensityRatioModel& model);
void from_json(const Json& j, DensityRatioModel& model);
void to_json(Json& j, const SynthConfig& config);
void from_json(const Json& j, SynthConfig& config);

void to_json(Json& j, const EvalReport& report);
void to_json(Json& j, const WorstCaseReport& report);
void to_json(Json& j, const SensitivityEstimate& estimate);
void to_json(Json& j, const SensitivityRange& range);
void to_json(Json& j, const OptTrace& trace);
void to_json(Json& j, const OracleWorld& world);
void to_json(Json& j, const TruthRecord& truth);

// Writes `doc` (plus schema_version) with 2-space indentation and a trailing
// newline. Throws kData if the file cannot be written.
void save_json(const std::string& path, Json doc);
// Throws kData on unreadable files or malformed JSON, kInvalidArgument on an
// unsupported schema_version.
Json load_json(const std::string& path);

}  // namespace ovb

#endif  // OVB_SERIALIZE_H_
