#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "gsedit/mock_oracles.hpp"
#include "gsedit/pipeline.hpp"

namespace gsedit::cli {

/// Pipeline config JSON: {prompt, gamma, tau, cycles:[{m, start_t, iters}],
/// guidance_w, seed, loss:{l1, perceptual}} plus optional filter_sigma,
/// vote_threshold, background [r,g,b], use_depth_init and init:{stride, opacity}.
PipelineConfig parse_pipeline_config(const nlohmann::json& j);
nlohmann::json to_json(const PipelineConfig& config);

/// Mock recipe JSON: {recolor:[{index, color}], add:[{mean, scale, rotation?,
/// opacity, color}], depth:{a0, b0}, blob_amplitude, latent_channels}.
MockRecipe parse_mock_recipe(const nlohmann::json& j);

/// Parses `args` (without the program name) and runs the subcommand.
/// Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gsedit::cli
