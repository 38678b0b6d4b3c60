#pragma once

#include "exitflow/experiment.hpp"

#include <stdexcept>
#include <string>

namespace exitflow {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CampaignConfig {
  ExperimentPlan plan;
  RunOptions io;
};

// Parses and validates a campaign TOML document; errors carry the source
// line of the offending key. The schema is documented in the README.
CampaignConfig parse_config(const std::string& toml_text);
CampaignConfig load_config(const std::string& path);

}  // namespace exitflow
