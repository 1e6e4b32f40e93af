#include "siren/analysis/representation.hpp"

#include <json.hpp>

#include "siren/analysis/information.hpp"
#include "siren/errors.hpp"
#include "siren/quantizer/kmeans.hpp"

namespace siren {

std::vector<float> interest_vectors(const ModelParams& params, const FeatureIndex& features, const PreparedData& data,
                                    std::span<const std::size_t> impressions) {
    std::vector<float> out;
    out.reserve(impressions.size() * params.config.unified_width());
    ForwardCache cache;
    for (auto i : impressions) {
        forward(params, features, data.example(i), cache);
        out.insert(out.end(), cache.interest.begin(), cache.interest.end());
    }
    return out;
}

std::vector<MiPoint> mi_vs_clusters(const ModelParams& params, const FeatureIndex& features, const PreparedData& data,
                                    std::span<const std::size_t> impressions, const MiConfig& config) {
    const auto vectors = interest_vectors(params, features, data, impressions);
    std::vector<std::uint8_t> labels;
    labels.reserve(impressions.size());
    for (auto i : impressions) labels.push_back(data.corpus().impressions[i].label);
    std::vector<MiPoint> out;
    for (auto k : config.clusters) {
        if (k == 0) throw ConfigError("analysis.clusters entries must be at least 1");
        const auto km = kmeans(vectors, params.config.unified_width(), KMeansConfig{k, config.iterations, config.seed});
        const auto null = permutation_null(km.assignment, labels, config.permutations, config.seed ^ k);
        out.push_back({k, null.observed, null.p99, null.p_value});
    }
    return out;
}

std::vector<SweepPoint> bucket_sweep(const PreparedData& data, const Split& split, const SemIdMap* semids,
                                     const ModelConfig& model, const PrefixVocabulary& vocab,
                                     const TrainConfig& train_config, std::span<const std::size_t> bucket_counts) {
    std::vector<SweepPoint> out;
    for (auto B : bucket_counts) {
        ModelConfig cfg = model;
        cfg.buckets = B;
        const auto result = train(data, split, init_params(cfg, vocab), semids, train_config);
        out.push_back({B, result.eval_gauc});
    }
    return out;
}

std::string mi_jsonl(const std::vector<MiPoint>& points) {
    std::string out;
    for (const auto& p : points) {
        out += nlohmann::ordered_json{{"k", p.k}, {"mi", p.mi}, {"null_p99", p.null_p99}, {"p_value", p.p_value}}.dump();
        out += '\n';
    }
    return out;
}

std::string sweep_jsonl(const std::vector<SweepPoint>& points) {
    std::string out;
    for (const auto& p : points) {
        out += nlohmann::ordered_json{{"buckets", p.buckets}, {"gauc", p.gauc}}.dump();
        out += '\n';
    }
    return out;
}

}  // namespace siren
