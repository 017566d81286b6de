#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cavity/config.hpp"

namespace cavity {

struct RunOptions {
    unsigned threads = 0;                       ///< 0 uses every hardware thread
    std::optional<std::filesystem::path> out;   ///< overrides the config output path
};

struct RunResult {
    std::vector<std::filesystem::path> files;  ///< written outputs
    std::string summary;                        ///< one line for the terminal
};

/// Default output file name: <experiment>.csv or <experiment>.json.
std::filesystem::path default_output(const ExperimentConfig& config);

/// Runs one experiment and writes its outputs. A CSV result comes with a
/// <path>.meta.json sidecar holding the metadata; a JSON result embeds it.
/// Throws on fatal errors, before any file is written.
RunResult run(const ExperimentConfig& config, const RunOptions& options = {});

}  // namespace cavity
