#pragma once

// Flat configuration files: one `key = value` pair per line, values written
// as JSON (numbers, strings, booleans, arrays). Blank lines and lines starting
// with '#' are ignored.
//
//   preset = "table2"
//   seeds = [0, 1, 2]
//   scale = 0.5

#include "tenips/experiment.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

namespace tenips {

using ConfigValues = std::map<std::string, nlohmann::json>;

/// Throws std::invalid_argument naming the offending line.
ConfigValues parse_config(std::istream& is);
ConfigValues load_config(const std::filesystem::path& path);

/// Overwrites the fields named in `values`; unknown keys are rejected.
void apply_config(ExperimentConfig& cfg, const ConfigValues& values);

}  // namespace tenips
