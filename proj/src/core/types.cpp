#include "siren/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "siren/errors.hpp"
#include "siren/simd/kernels.hpp"

namespace siren {

std::span<const BehaviorEvent> BehaviorSequence::visible_before(Timestamp t) const {
    return {events.data(), visible_count(t)};
}

std::size_t BehaviorSequence::visible_count(Timestamp t) const {
    const auto it = std::lower_bound(events.begin(), events.end(), t,
                                     [](const BehaviorEvent& e, Timestamp v) { return e.timestamp < v; });
    return static_cast<std::size_t>(it - events.begin());
}

namespace {

void check_features(const std::vector<FeatureValue>& values, const std::vector<std::uint32_t>& vocab,
                    const std::string& what) {
    if (values.size() != vocab.size()) {
        throw SchemaError(what + ": expected " + std::to_string(vocab.size()) + " feature slots, got " +
                          std::to_string(values.size()));
    }
    for (std::size_t s = 0; s < values.size(); ++s) {
        if (values[s] >= vocab[s]) {
            throw SchemaError(what + ": feature slot " + std::to_string(s) + " value " +
                              std::to_string(values[s]) + " outside vocabulary of " + std::to_string(vocab[s]));
        }
    }
}

}  // namespace

void Corpus::finalize() {
    if (meta.dim == 0) throw SchemaError("corpus dimension must be positive");

    item_lookup_.clear();
    item_lookup_.reserve(items.size());
    embeddings_.assign(items.size() * meta.dim, 0.0f);
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& item = items[i];
        const std::string what = "item " + std::to_string(item.item_id);
        if (item.embedding.size() != meta.dim) {
            throw SchemaError(what + ": embedding dimension " + std::to_string(item.embedding.size()) +
                              " does not match corpus dimension " + std::to_string(meta.dim));
        }
        for (float v : item.embedding) {
            if (!std::isfinite(v)) throw SchemaError(what + ": non-finite embedding entry");
        }
        check_features(item.id_features, meta.item_vocab, what);
        if (!item_lookup_.emplace(item.item_id, i).second) throw SchemaError(what + ": duplicate item id");
        std::copy(item.embedding.begin(), item.embedding.end(), embeddings_.begin() + i * meta.dim);
    }
    squared_norms_.resize(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) squared_norms_[i] = simd::squared_norm(embedding(i));

    sequence_lookup_.clear();
    sequence_lookup_.reserve(sequences.size());
    sequence_items_.assign(sequences.size(), {});
    for (std::size_t s = 0; s < sequences.size(); ++s) {
        const auto& seq = sequences[s];
        const std::string what = "sequence of user " + std::to_string(seq.user_id);
        if (!sequence_lookup_.emplace(seq.user_id, s).second) throw SchemaError(what + ": duplicate user id");
        auto& idx = sequence_items_[s];
        idx.reserve(seq.events.size());
        for (std::size_t e = 0; e < seq.events.size(); ++e) {
            if (e > 0 && seq.events[e].timestamp < seq.events[e - 1].timestamp) {
                throw SchemaError(what + ": timestamps decrease at event " + std::to_string(e));
            }
            const auto it = item_lookup_.find(seq.events[e].item_id);
            if (it == item_lookup_.end()) {
                throw SchemaError(what + ": unknown item " + std::to_string(seq.events[e].item_id));
            }
            idx.push_back(static_cast<std::uint32_t>(it->second));
        }
    }

    for (std::size_t i = 0; i < impressions.size(); ++i) {
        const auto& imp = impressions[i];
        const std::string what = "impression " + std::to_string(i);
        if (imp.label > 1) throw SchemaError(what + ": label must be 0 or 1");
        if (!item_lookup_.count(imp.target_item_id)) {
            throw SchemaError(what + ": unknown target item " + std::to_string(imp.target_item_id));
        }
        if (!sequence_lookup_.count(imp.user_id)) {
            throw SchemaError(what + ": unknown user " + std::to_string(imp.user_id));
        }
        check_features(imp.user_features, meta.user_vocab, what + " user features");
        check_features(imp.context_features, meta.context_vocab, what + " context features");
    }
}

std::optional<std::size_t> Corpus::find_item(ItemId id) const {
    const auto it = item_lookup_.find(id);
    if (it == item_lookup_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> Corpus::find_sequence(UserId id) const {
    const auto it = sequence_lookup_.find(id);
    if (it == sequence_lookup_.end()) return std::nullopt;
    return it->second;
}

std::size_t Corpus::item_index(ItemId id) const {
    if (auto i = find_item(id)) return *i;
    throw SchemaError("unknown item " + std::to_string(id));
}

std::size_t Corpus::sequence_index(UserId id) const {
    if (auto i = find_sequence(id)) return *i;
    throw SchemaError("unknown user " + std::to_string(id));
}

}  // namespace siren
