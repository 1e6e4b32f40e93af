#pragma once

#include <filesystem>
#include <json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "siren/analysis/dispersion.hpp"
#include "siren/analysis/representation.hpp"
#include "siren/core/split.hpp"
#include "siren/core/synth.hpp"
#include "siren/gsu/bench.hpp"
#include "siren/quantizer/codebooks.hpp"
#include "siren/training/train.hpp"

namespace siren::cli {

using Json = nlohmann::ordered_json;

// Every accepted key with its default value. A user config may only contain
// keys present here, with values of the same JSON type.
Json default_config();

// Overlays `user` onto `base`. Throws ConfigError naming the dotted path of
// an unknown key or a type mismatch.
Json merge_config(const Json& base, const Json& user, const std::string& path = "");

// "a.b.c=value"; value is parsed as JSON when possible, otherwise taken as a
// string.
void apply_override(Json& config, const std::string& assignment);

struct ExperimentConfig {
    Json resolved;
    std::uint64_t seed = 0;
    std::optional<std::filesystem::path> corpus_path;
    SynthConfig synth;
    SplitConfig split;
    QuantizerConfig quantizer;
    std::size_t prefix_depth = 3;
    std::size_t prefix_width = 8;
    bool calibrate_range = true;
    CalibrationConfig calibration;
    SimRange fixed_range;
    GsuConfig gsu;
    ModelConfig model;  // vocabularies are bound once the corpus is known
    TrainConfig training;
    BenchConfig bench;
    std::size_t retrieve_limit = 1000;
    MiConfig mi;
    bool mi_compare = false;
    DispersionConfig dispersion;
    std::vector<std::size_t> sweep_buckets;
    bool analyze_all_impressions = false;

    std::string hash() const;  // sha256 of the resolved config
};

// Converts a resolved config into typed settings and validates every field,
// including the model width algebra, before any work starts.
ExperimentConfig parse_config(const Json& resolved);

ExperimentConfig load_config(const std::optional<std::filesystem::path>& file,
                             std::span<const std::string> overrides);

// Model settings with the corpus's vocabularies and the similarity range.
ModelConfig bind_model(const ExperimentConfig& config, const CorpusMeta& meta, const SimRange& range);

}  // namespace siren::cli
