#pragma once

#include <filesystem>
#include <string>

#include "sdwan/model.h"

namespace sdwan {

// Scenario files are JSON documents with the sections networks, nodes, ports,
// overlay_links, flow_groups, traffic_profiles, cross_traffic, optimizer,
// loops and seed. Parsing errors surface as ValidationError with the JSON path.
Scenario parse_scenario(const std::string& text);
std::string format_scenario(const Scenario& scenario);

// Reads and validates. Throws std::runtime_error when the file is unreadable.
Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

}  // namespace sdwan
