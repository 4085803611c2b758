#pragma once

#include <optional>
#include <string>

#include "implicit_sparse/experiments.hpp"

namespace implicit_sparse {

// JSON config over the preset and family defaults. Unknown keys are rejected; syntax errors
// report line and column. `preset` overrides the file's own "preset" key when given.
ExperimentConfig parse_config_text(const std::string& text, std::optional<Preset> preset = std::nullopt,
                                   const std::string& source = "<config>");

// Throws IoError when the file cannot be read.
ExperimentConfig parse_config_file(const std::string& path, std::optional<Preset> preset = std::nullopt);

// Every field written out explicitly, so the text parses back to an equal config.
std::string serialize(const ExperimentConfig& cfg);

}  // namespace implicit_sparse
