#pragma once

#include <filesystem>
#include <string>

#include "config.hpp"

namespace siren::cli {

inline constexpr const char* kVersion = "1.0.0";

// Commands read upstream artifacts from the run directory and write their own
// next to them, plus manifests/<command>.json. A missing upstream artifact
// raises DependencyError naming the command that produces it.
void cmd_synth(const ExperimentConfig& config, const std::filesystem::path& run_dir);
void cmd_quantize(const ExperimentConfig& config, const std::filesystem::path& run_dir);
void cmd_index(const ExperimentConfig& config, const std::filesystem::path& run_dir);
void cmd_retrieve(const ExperimentConfig& config, const std::filesystem::path& run_dir);
void cmd_train(const ExperimentConfig& config, const std::filesystem::path& run_dir);
void cmd_eval(const ExperimentConfig& config, const std::filesystem::path& run_dir);
void cmd_bench(const ExperimentConfig& config, const std::filesystem::path& run_dir);
void cmd_analyze_gain(const ExperimentConfig& config, const std::filesystem::path& run_dir);
void cmd_analyze_dispersion(const ExperimentConfig& config, const std::filesystem::path& run_dir);
void cmd_analyze_mi(const ExperimentConfig& config, const std::filesystem::path& run_dir);
void cmd_analyze_sweep(const ExperimentConfig& config, const std::filesystem::path& run_dir);

// Process exit status for an exception escaping a command.
int exit_code_for(const std::exception& e);

}  // namespace siren::cli
