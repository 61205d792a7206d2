#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dso/mlp.hpp"
#include "dso/optimizer.hpp"
#include "dso/ptx_features.hpp"
#include "dso/sim_harness.hpp"
#include "dso/telemetry.hpp"

namespace dso {

// Version stamped into every emitted document.
inline constexpr int kFormatVersion = 1;

nlohmann::json to_json(const KernelModelParams& params);
KernelModelParams params_from_json(const nlohmann::json& j);

nlohmann::json to_json(const DeviceConstants& dev);
DeviceConstants device_from_json(const nlohmann::json& j);

nlohmann::json to_json(const DvfsDomain& domain);
DvfsDomain domain_from_json(const nlohmann::json& j);

nlohmann::json to_json(const DvfsConfig& cfg);

nlohmann::json to_json(const OptimizationResult& result);

nlohmann::json to_json(const DcgmMetricVector& metrics);

// One object per kernel: {kernel, instr[101], dtype[17], memspace[8]}.
nlohmann::json feature_json(const std::string& kernel_name, const PtxFeatureVector& features);

// Weights are stored row-major per layer; doubles survive the round trip
// bit-exactly. Throws Error(InvalidModel) on non-finite values.
nlohmann::json to_json(const MlpModel& model);
MlpModel model_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CampaignReport& report);

nlohmann::json to_json(const SyntheticKernel& kernel);
nlohmann::json corpus_to_json(const std::vector<SyntheticKernel>& corpus);

// JSON-lines dataset: one {"features": [...], "targets": [...]} per line.
std::string dataset_to_jsonl(const std::vector<TrainingExample>& dataset);
std::vector<TrainingExample> dataset_from_jsonl(std::string_view text);

// Parse with errors mapped onto Error(SchemaMismatch).
nlohmann::json parse_json(std::string_view text, std::string_view what);

} // namespace dso
