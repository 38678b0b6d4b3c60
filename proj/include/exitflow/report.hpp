#pragma once

#include <json.hpp>

#include <string>

namespace exitflow {

// Human-readable per-target table from a campaign summary document.
std::string render_table(const nlohmann::json& summary);

// Static log-log SVG of p-hat vs epsilon with fitted and predicted lines.
std::string render_svg(const nlohmann::json& summary);

}  // namespace exitflow
