#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "noir/simulator.hpp"

namespace noir {

/// Experiment config, line-oriented `key = value` with `[network]`, `[mpc]`
/// and `[sim]` sections. `#` starts a comment. Unknown sections or keys are
/// errors. A relative network path is resolved against `base_dir`.
SimulationConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
SimulationConfig load_config(const std::filesystem::path& path);

/// Canonical text for a config; parse_config(echo_config(c)) reproduces c.
std::string echo_config(const SimulationConfig& cfg);

}  // namespace noir
