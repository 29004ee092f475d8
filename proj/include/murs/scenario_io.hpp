#pragma once

// Scenario files: a YAML tree mirroring ScenarioSpec. Errors carry the
// 1-based line of the offending node.

#include <string>

#include "murs/workloads.hpp"

namespace murs::io {

/// Parses and validates a scenario. Throws ConfigError.
workloads::ScenarioSpec load_scenario(const std::string& path);
workloads::ScenarioSpec parse_scenario(const std::string& text);

/// Emits a file that parse_scenario reads back to an equal spec.
std::string dump_scenario(const workloads::ScenarioSpec& s);

}  // namespace murs::io
