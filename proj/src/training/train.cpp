#include "siren/training/train.hpp"

#include <algorithm>
#include <json.hpp>
#include <numeric>
#include <random>

#include "siren/errors.hpp"
#include "siren/training/metrics.hpp"

namespace siren {

PreparedData::PreparedData(const Corpus& corpus, const GsuConfig& gsu, const SemIdMap* semids,
                           std::size_t codebook_size)
    : corpus_(corpus), gsu_(gsu) {
    const Gsu unit(corpus, gsu, semids, codebook_size);
    offsets_.reserve(corpus.impressions.size() + 1);
    offsets_.push_back(0);
    for (std::size_t i = 0; i < corpus.impressions.size(); ++i) {
        const auto r = unit.retrieve(i);
        if (r.tag == RetrievalTag::Fallback) ++fallbacks_;
        if (r.events.empty()) ++empties_;
        for (const auto& ev : r.events) {
            items_.push_back(ev.item);
            sims_.push_back(ev.similarity);
        }
        offsets_.push_back(items_.size());
        targets_.push_back(static_cast<std::uint32_t>(corpus.item_index(corpus.impressions[i].target_item_id)));
    }
}

Example PreparedData::example(std::size_t i) const {
    const auto& imp = corpus_.impressions[i];
    Example ex;
    ex.target = targets_[i];
    ex.behaviors = std::span(items_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
    ex.similarities = std::span(sims_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
    ex.user_features = imp.user_features;
    ex.context_features = imp.context_features;
    ex.label = imp.label;
    return ex;
}

void TrainConfig::validate() const {
    optimizer.validate();
    if (batch_size == 0) throw ConfigError("training.batch_size must be at least 1");
    if (epochs == 0) throw ConfigError("training.epochs must be at least 1");
}

std::vector<double> predict_impressions(const ModelParams& params, const FeatureIndex& features,
                                        const PreparedData& data, std::span<const std::size_t> impressions) {
    std::vector<double> out;
    out.reserve(impressions.size());
    ForwardCache cache;
    for (auto i : impressions) out.push_back(forward(params, features, data.example(i), cache));
    return out;
}

double evaluate_gauc(const ModelParams& params, const FeatureIndex& features, const PreparedData& data,
                     std::span<const std::size_t> impressions) {
    const auto scores = predict_impressions(params, features, data, impressions);
    std::vector<UserId> users;
    std::vector<std::uint8_t> labels;
    for (auto i : impressions) {
        users.push_back(data.corpus().impressions[i].user_id);
        labels.push_back(data.corpus().impressions[i].label);
    }
    return gauc(users, scores, labels);
}

TrainResult train(const PreparedData& data, const Split& split, ModelParams params, const SemIdMap* semids,
                  const TrainConfig& config) {
    config.validate();
    if (split.train.empty()) throw ConfigError("training split is empty");
    const FeatureIndex features(data.corpus(), params, semids);
    Optimizer opt(params, config.optimizer);
    GradientSet grads(params);
    ForwardCache cache;
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(split.train.begin(), split.train.end());

    TrainResult result;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
            const std::size_t e = std::min(order.size(), b + config.batch_size);
            const double inv = 1.0 / double(e - b);
            grads.clear();
            double loss = 0.0;
            for (std::size_t j = b; j < e; ++j) {
                const auto ex = data.example(order[j]);
                forward(params, features, ex, cache);
                loss += bce_loss_logit(cache.mlp.logit, ex.label);
                backward(params, features, ex, cache, (cache.probability - double(ex.label)) * inv, grads);
            }
            opt.step(params, grads);
            ++step;
            MetricRecord rec{step, loss * inv, std::nullopt};
            const bool last = epoch + 1 == config.epochs && e == order.size();
            if (!split.eval.empty() && (last || (config.eval_every && step % config.eval_every == 0))) {
                rec.eval_gauc = evaluate_gauc(params, features, data, split.eval);
            }
            result.history.push_back(rec);
        }
    }
    if (!result.history.empty() && result.history.back().eval_gauc) result.eval_gauc = *result.history.back().eval_gauc;
    result.params = std::move(params);
    return result;
}

std::string metrics_jsonl(const std::vector<MetricRecord>& history) {
    std::string out;
    for (const auto& r : history) {
        nlohmann::ordered_json j = {{"step", r.step}, {"loss", r.loss}, {"eval_gauc", nullptr}};
        if (r.eval_gauc) j["eval_gauc"] = *r.eval_gauc;
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace siren
