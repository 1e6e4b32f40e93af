#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "siren/core/split.hpp"
#include "siren/esu/forward.hpp"
#include "siren/gsu/retrieval.hpp"
#include "siren/training/optimizer.hpp"

namespace siren {

// GSU output for every impression of a corpus, computed once and shared by
// any number of training runs over the same retrieval settings. Buckets are
// not stored; each model bucketizes the similarities with its own range.
class PreparedData {
public:
    PreparedData(const Corpus& corpus, const GsuConfig& gsu, const SemIdMap* semids = nullptr,
                 std::size_t codebook_size = 0);

    Example example(std::size_t impression) const;
    std::size_t size() const { return targets_.size(); }
    const Corpus& corpus() const { return corpus_; }
    const GsuConfig& gsu() const { return gsu_; }
    std::size_t fallback_count() const { return fallbacks_; }
    std::size_t empty_count() const { return empties_; }

private:
    const Corpus& corpus_;
    GsuConfig gsu_;
    std::vector<std::size_t> offsets_;
    std::vector<std::uint32_t> items_;
    std::vector<double> sims_;
    std::vector<std::uint32_t> targets_;
    std::size_t fallbacks_ = 0;
    std::size_t empties_ = 0;
};

struct TrainConfig {
    OptimizerConfig optimizer;
    std::size_t batch_size = 1000;
    std::size_t epochs = 1;
    std::uint64_t seed = 0;
    // Evaluate GAUC on the eval split every this many steps; 0 evaluates only
    // after the last step.
    std::size_t eval_every = 0;

    void validate() const;  // throws ConfigError
};

struct MetricRecord {
    std::size_t step = 0;
    double loss = 0.0;  // mean BCE of the step's batch
    std::optional<double> eval_gauc;
};

struct TrainResult {
    ModelParams params;
    std::vector<MetricRecord> history;
    double eval_gauc = 0.0;
};

// Minibatch training over split.train in a seeded shuffled order per epoch.
// Deterministic given the initial params and config.
TrainResult train(const PreparedData& data, const Split& split, ModelParams params, const SemIdMap* semids,
                  const TrainConfig& config);

std::vector<double> predict_impressions(const ModelParams& params, const FeatureIndex& features,
                                        const PreparedData& data, std::span<const std::size_t> impressions);

double evaluate_gauc(const ModelParams& params, const FeatureIndex& features, const PreparedData& data,
                     std::span<const std::size_t> impressions);

// One {"step","loss","eval_gauc"} record per line; eval_gauc is null on steps
// without evaluation.
std::string metrics_jsonl(const std::vector<MetricRecord>& history);

}  // namespace siren
