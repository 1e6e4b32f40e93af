#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "siren/core/types.hpp"
#include "siren/quantizer/codebooks.hpp"
#include "siren/similarity/similarity.hpp"

namespace siren {

enum class RetrievalTag { Soft, Hard, Fallback };
enum class GsuStrategy { Soft, Hard };
enum class FallbackPolicy { None, Recency };

struct RetrievedEvent {
    std::uint32_t position = 0;  // index into the user's full sequence
    std::uint32_t item = 0;      // corpus item index
    ItemId item_id = 0;
    Timestamp timestamp = 0;
    double similarity = 0.0;     // cosine to the target
    std::uint32_t bucket = 0;

    bool operator==(const RetrievedEvent&) const = default;
};

// Always timestamp-ascending (ties by position) for the ESU.
struct RetrievedSequence {
    std::vector<RetrievedEvent> events;
    RetrievalTag tag = RetrievalTag::Soft;
};

// Memory traffic of a retrieval, counted at the granularity of the records
// each strategy has to read.
struct RetrievalStats {
    std::uint64_t bytes_touched = 0;
    std::uint64_t queries = 0;
};

// Exact top-k by cosine over the user's events strictly before `event_time`.
// Ranking ties: more recent first, then lower item id, then later position.
RetrievedSequence soft_retrieve(const Corpus& corpus, std::size_t sequence, Timestamp event_time,
                                std::size_t target_item, std::size_t k, RetrievalStats* stats = nullptr);

// Per-user inverted index from top-level code to event positions, posting
// lists ascending in time. Holds a pointer to the sequence, which must
// outlive the index.
class InvertedIndex {
public:
    InvertedIndex() = default;

    std::span<const std::uint32_t> postings(std::uint32_t code) const;
    std::size_t codes() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
    std::size_t size() const { return positions_.size(); }
    std::size_t memory_bytes() const;
    const BehaviorSequence& sequence() const { return *sequence_; }
    std::span<const std::uint32_t> items() const { return items_; }

    friend InvertedIndex build_index(const Corpus&, std::size_t, const SemIdMap&, std::size_t);

private:
    const BehaviorSequence* sequence_ = nullptr;
    std::span<const std::uint32_t> items_;
    std::vector<std::uint32_t> offsets_;    // codes + 1
    std::vector<std::uint32_t> positions_;  // grouped by code, time-ascending
};

// Throws DataError naming every history item without a SemId.
InvertedIndex build_index(const Corpus& corpus, std::size_t sequence, const SemIdMap& semids,
                          std::size_t codebook_size);

// Events sharing `target_code` at level 1 and strictly before `event_time`,
// the k most recent of them. With no match, Recency falls back to the k most
// recent visible events (tagged Fallback); None returns an empty sequence.
// Similarities are left at 0; attach_similarity() fills them.
RetrievedSequence hard_retrieve(const InvertedIndex& index, std::uint32_t target_code, Timestamp event_time,
                                std::size_t k, FallbackPolicy fallback, RetrievalStats* stats = nullptr);

void attach_similarity(RetrievedSequence& seq, const Corpus& corpus, std::size_t target_item,
                       RetrievalStats* stats = nullptr);

void assign_buckets(RetrievedSequence& seq, const BucketConfig& config);

struct GsuConfig {
    GsuStrategy strategy = GsuStrategy::Soft;
    std::size_t k = 50;
    FallbackPolicy fallback = FallbackPolicy::Recency;
};

// Retrieval for whole impressions. Hard retrieval needs SemIds; indexes for
// every user are built up front.
class Gsu {
public:
    Gsu(const Corpus& corpus, GsuConfig config, const SemIdMap* semids = nullptr, std::size_t codebook_size = 0);

    // Similarities attached, buckets not yet assigned.
    RetrievedSequence retrieve(std::size_t impression) const;

    const GsuConfig& config() const { return config_; }

private:
    const Corpus& corpus_;
    GsuConfig config_;
    std::vector<InvertedIndex> indexes_;
    std::vector<std::uint32_t> top_code_;  // level-1 code per item index
};

}  // namespace siren
