#pragma once

#include "threetank/scenario.hpp"

#include <string>

namespace threetank::harness {

// Parses the JSON scenario format (see docs/config_schema.md). Unknown keys
// and malformed values raise ConfigError. The result is validated.
ScenarioConfig parse_config(const std::string& json_text);
ScenarioConfig load_config(const std::string& path);

}  // namespace threetank::harness
