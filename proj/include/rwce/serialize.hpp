#pragma once

#include <filesystem>

#include <json.hpp>

#include "rwce/calibration.hpp"
#include "rwce/data.hpp"
#include "rwce/trainer.hpp"

namespace rwce {

using Json = nlohmann::json;

// Field access that reports the offending key; keeps CLI validation messages
// uniform ("config: missing field seed").
const Json& require_field(const Json& j, const std::string& key);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const Json& j, const std::filesystem::path& path);

Json score_spec_to_json(const ScoreSpec& spec);
ScoreSpec score_spec_from_json(const Json& j);

Json smooth_spec_to_json(const SmoothIndicatorSpec& spec);
SmoothIndicatorSpec smooth_spec_from_json(const Json& j);

Json training_config_to_json(const TrainingConfig& config);
TrainingConfig training_config_from_json(const Json& j);

Json synthetic_spec_to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from_json(const Json& j);

// Predictor round-trips with the checkpoint path it was calibrated from;
// an infinite threshold serializes as the string "inf".
Json predictor_to_json(const ConformalPredictor& predictor, const std::string& checkpoint_path);
ConformalPredictor predictor_from_json(const Json& j, std::string* checkpoint_path = nullptr);

}  // namespace rwce
