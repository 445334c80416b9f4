#pragma once

#include <map>
#include <string>

#include "ademi/harness.hpp"

namespace ademi {

using KeyValues = std::map<std::string, std::string>;

/// Flat dotted-key configuration text: `section.key = value`, '#' comments.
KeyValues parse_config_text(const std::string& text);
KeyValues read_config_file(const std::string& path);

/// Applies a single `key=value` override.
void apply_override(KeyValues& kv, const std::string& assignment);

/// Builds an ExperimentConfig from defaults plus the given keys. Unknown
/// keys are rejected.
ExperimentConfig config_from_kv(const KeyValues& kv);

/// Serializes a config with explicit units in the key names.
KeyValues config_to_kv(const ExperimentConfig& cfg);
std::string config_text(const ExperimentConfig& cfg);

}  // namespace ademi
