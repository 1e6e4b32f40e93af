#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "siren/training/train.hpp"

namespace siren {

// The interest vector each impression feeds the prediction head (u * h_t, or
// u for models without target interaction), n x D row-major as float.
std::vector<float> interest_vectors(const ModelParams& params, const FeatureIndex& features, const PreparedData& data,
                                    std::span<const std::size_t> impressions);

struct MiConfig {
    std::vector<std::size_t> clusters{8, 32, 128};
    std::size_t iterations = 25;
    std::size_t permutations = 200;
    std::uint64_t seed = 0;
};

struct MiPoint {
    std::size_t k = 0;
    double mi = 0.0;        // I(cluster; label), nats
    double null_p99 = 0.0;  // 99th percentile under label permutation
    double p_value = 1.0;
};

// k-means over interest vectors for each k, then plug-in MI against labels.
std::vector<MiPoint> mi_vs_clusters(const ModelParams& params, const FeatureIndex& features, const PreparedData& data,
                                    std::span<const std::size_t> impressions, const MiConfig& config);

struct SweepPoint {
    std::size_t buckets = 0;
    double gauc = 0.0;
};

// Trains one model per bucket count from the same seed and reports eval GAUC.
std::vector<SweepPoint> bucket_sweep(const PreparedData& data, const Split& split, const SemIdMap* semids,
                                     const ModelConfig& model, const PrefixVocabulary& vocab,
                                     const TrainConfig& train_config, std::span<const std::size_t> bucket_counts);

std::string mi_jsonl(const std::vector<MiPoint>& points);
std::string sweep_jsonl(const std::vector<SweepPoint>& points);

}  // namespace siren
