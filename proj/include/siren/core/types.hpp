#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace siren {

using ItemId = std::uint64_t;
using UserId = std::uint64_t;
using Timestamp = std::int64_t;

// Categorical feature value: index into the slot's vocabulary.
using FeatureValue = std::uint32_t;

struct ItemRecord {
    ItemId item_id = 0;
    std::vector<FeatureValue> id_features;
    std::vector<float> embedding;

    bool operator==(const ItemRecord&) const = default;
};

struct BehaviorEvent {
    ItemId item_id = 0;
    Timestamp timestamp = 0;

    bool operator==(const BehaviorEvent&) const = default;
};

struct BehaviorSequence {
    UserId user_id = 0;
    std::vector<BehaviorEvent> events;  // timestamp ascending, ties in insertion order

    // Events strictly before `t`. This is the only history view handed to
    // retrieval and the model.
    std::span<const BehaviorEvent> visible_before(Timestamp t) const;
    std::size_t visible_count(Timestamp t) const;

    bool operator==(const BehaviorSequence&) const = default;
};

struct Impression {
    UserId user_id = 0;
    ItemId target_item_id = 0;
    std::vector<FeatureValue> context_features;
    std::vector<FeatureValue> user_features;
    std::uint8_t label = 0;
    Timestamp event_time = 0;

    bool operator==(const Impression&) const = default;
};

struct CorpusMeta {
    std::size_t dim = 128;
    std::vector<std::uint32_t> item_vocab;     // per item feature slot
    std::vector<std::uint32_t> user_vocab;     // per user feature slot
    std::vector<std::uint32_t> context_vocab;  // per context feature slot
    std::uint64_t seed = 0;

    bool operator==(const CorpusMeta&) const = default;
};

// Immutable after finalize(): lookups and the contiguous embedding matrix are
// derived from items/sequences and must be rebuilt if either changes.
class Corpus {
public:
    CorpusMeta meta;
    std::vector<ItemRecord> items;
    std::vector<BehaviorSequence> sequences;
    std::vector<Impression> impressions;

    // Validates every invariant (dimensions, finiteness, feature counts and
    // ranges, ordering, referential integrity) and builds lookup tables.
    // Throws SchemaError on the first violation.
    void finalize();

    std::optional<std::size_t> find_item(ItemId id) const;
    std::optional<std::size_t> find_sequence(UserId id) const;

    std::size_t item_index(ItemId id) const;      // throws SchemaError if unknown
    std::size_t sequence_index(UserId id) const;  // throws SchemaError if unknown

    std::span<const float> embedding(std::size_t item_idx) const {
        return {embeddings_.data() + item_idx * meta.dim, meta.dim};
    }
    std::span<const float> embedding_matrix() const { return embeddings_; }
    // Squared L2 norm of each item embedding, computed once at finalize().
    double squared_norm(std::size_t item_idx) const { return squared_norms_[item_idx]; }

    // Item indices of a sequence's events, aligned with sequences[s].events.
    std::span<const std::uint32_t> sequence_items(std::size_t s) const { return sequence_items_[s]; }

    bool operator==(const Corpus& o) const {
        return meta == o.meta && items == o.items && sequences == o.sequences &&
               impressions == o.impressions;
    }

private:
    std::vector<float> embeddings_;
    std::vector<double> squared_norms_;
    std::unordered_map<ItemId, std::size_t> item_lookup_;
    std::unordered_map<UserId, std::size_t> sequence_lookup_;
    std::vector<std::vector<std::uint32_t>> sequence_items_;
};

}  // namespace siren
