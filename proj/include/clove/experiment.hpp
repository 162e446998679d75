#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "clove/engine.hpp"

namespace clove {

/// Invalid or unparseable configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One world/federation combination executed per seed. The label is the
/// `algorithm` column value in every emitted CSV.
struct RunSpec {
    std::string label;
    WorldConfig world;
    std::optional<SkewSpec> skew;
    FederationConfig federation;
};

struct ExperimentConfig {
    std::vector<RunSpec> runs;
    std::vector<uint64_t> seeds;
    std::string output_dir = "out";
    std::string preset;
};

ExperimentConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

/// Parses a config JSON document. Unknown keys are errors. A "preset" key
/// loads the named preset as the base; any world/federation/algorithms/seeds
/// keys present override it field by field.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_file(const std::string& path);

struct SeedRunResult {
    std::string label;
    uint64_t seed = 0;
    std::vector<RoundRecord> records;
};

/// Runs every (run, seed) unit; `jobs` > 1 executes units in parallel.
/// Results keep (run, seed) order regardless of scheduling.
std::vector<SeedRunResult> execute_experiment(const ExperimentConfig& cfg, int jobs = 1);

std::string rounds_csv(const std::vector<SeedRunResult>& results);
std::string summary_csv(const std::vector<SeedRunResult>& results);

/// Writes content to path via a temp file + rename.
void write_file_atomic(const std::string& path, const std::string& content);

// CLI entry points; return process exit codes (0 ok, 1 runtime, 2 config).
int cmd_run(const std::string& config_path, const std::string& out_override, int jobs);
int cmd_sweep(const std::string& config_path, const std::string& param,
              const std::vector<double>& values, const std::string& out_override,
              int jobs);
int cmd_ablate(const std::string& config_path, const std::string& out_override,
               int jobs);

}  // namespace clove
