#pragma once

#include <string>

#include "cfn/cfn_model.hpp"
#include "cfn/mlp.hpp"

namespace cfn {

/// Parameter checkpoints: versioned JSON with a shape header and the
/// parameter values as one flat list of doubles (row-major per layer,
/// weights then bias). Doubles round-trip exactly.
std::string mlp_to_json(const MlpParams& params);
MlpParams mlp_from_json(const std::string& text);

/// Full CFN model state: both networks plus the prior normalizer.
std::string cfn_model_to_json(const CfnModel& model);
CfnModel cfn_model_from_json(const std::string& text);

void save_text_file(const std::string& path, const std::string& content);
std::string load_text_file(const std::string& path);

}  // namespace cfn
