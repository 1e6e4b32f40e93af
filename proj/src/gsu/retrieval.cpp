#include "siren/gsu/retrieval.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "siren/errors.hpp"

namespace siren {

namespace {

// First index in [0, n) whose timestamp is >= t, counting probes.
template <typename TimeAt>
std::size_t lower_bound_time(std::size_t n, Timestamp t, TimeAt time_at, std::uint64_t& probes) {
    std::size_t lo = 0, hi = n;
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        ++probes;
        if (time_at(mid) < t) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    return lo;
}

RetrievedEvent make_event(const BehaviorSequence& seq, std::span<const std::uint32_t> items, std::uint32_t pos) {
    RetrievedEvent ev;
    ev.position = pos;
    ev.item = items[pos];
    ev.item_id = seq.events[pos].item_id;
    ev.timestamp = seq.events[pos].timestamp;
    return ev;
}

}  // namespace

RetrievedSequence soft_retrieve(const Corpus& corpus, std::size_t s, Timestamp event_time, std::size_t target_item,
                                std::size_t k, RetrievalStats* stats) {
    if (k == 0) throw ConfigError("gsu.k must be at least 1");
    const auto& seq = corpus.sequences[s];
    const auto items = corpus.sequence_items(s);
    const std::size_t visible = seq.visible_count(event_time);
    const auto target = corpus.embedding(target_item);
    const double target_norm = corpus.squared_norm(target_item);

    std::vector<double> sims(visible);
    for (std::size_t e = 0; e < visible; ++e) {
        sims[e] = cosine_with_norms(corpus.embedding(items[e]), target, corpus.squared_norm(items[e]), target_norm);
    }
    if (stats) {
        stats->bytes_touched += visible * (corpus.meta.dim * sizeof(float) + sizeof(double) + sizeof(BehaviorEvent));
        ++stats->queries;
    }

    std::vector<std::uint32_t> order(visible);
    std::iota(order.begin(), order.end(), 0u);
    const auto better = [&](std::uint32_t a, std::uint32_t b) {
        if (sims[a] != sims[b]) return sims[a] > sims[b];
        const auto& ea = seq.events[a];
        const auto& eb = seq.events[b];
        if (ea.timestamp != eb.timestamp) return ea.timestamp > eb.timestamp;
        if (ea.item_id != eb.item_id) return ea.item_id < eb.item_id;
        return a > b;
    };
    const std::size_t take = std::min(k, visible);
    std::partial_sort(order.begin(), order.begin() + take, order.end(), better);
    order.resize(take);
    std::sort(order.begin(), order.end());

    RetrievedSequence out;
    out.tag = RetrievalTag::Soft;
    out.events.reserve(take);
    for (auto pos : order) {
        auto ev = make_event(seq, items, pos);
        ev.similarity = sims[pos];
        out.events.push_back(ev);
    }
    return out;
}

std::span<const std::uint32_t> InvertedIndex::postings(std::uint32_t code) const {
    if (code >= codes()) return {};
    return std::span(positions_).subspan(offsets_[code], offsets_[code + 1] - offsets_[code]);
}

std::size_t InvertedIndex::memory_bytes() const {
    return (offsets_.size() + positions_.size()) * sizeof(std::uint32_t);
}

InvertedIndex build_index(const Corpus& corpus, std::size_t s, const SemIdMap& semids, std::size_t codebook_size) {
    const auto& seq = corpus.sequences[s];
    InvertedIndex index;
    index.sequence_ = &seq;
    index.items_ = corpus.sequence_items(s);
    index.offsets_.assign(codebook_size + 1, 0);

    std::vector<std::uint32_t> codes(seq.events.size());
    std::vector<ItemId> missing;
    for (std::size_t e = 0; e < seq.events.size(); ++e) {
        const auto it = semids.find(seq.events[e].item_id);
        if (it == semids.end() || it->second.codes.empty()) {
            missing.push_back(seq.events[e].item_id);
            continue;
        }
        codes[e] = it->second.codes[0];
        if (codes[e] >= codebook_size) throw DataError("top-level code outside codebook for item " +
                                                        std::to_string(seq.events[e].item_id));
    }
    if (!missing.empty()) {
        std::sort(missing.begin(), missing.end());
        missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
        std::string msg = "index build for user " + std::to_string(seq.user_id) + ": items without SemId:";
        for (auto id : missing) msg += " " + std::to_string(id);
        throw DataError(msg);
    }

    for (auto c : codes) ++index.offsets_[c + 1];
    for (std::size_t c = 0; c < codebook_size; ++c) index.offsets_[c + 1] += index.offsets_[c];
    index.positions_.resize(codes.size());
    std::vector<std::uint32_t> cursor(index.offsets_.begin(), index.offsets_.end() - 1);
    for (std::size_t e = 0; e < codes.size(); ++e) index.positions_[cursor[codes[e]]++] = static_cast<std::uint32_t>(e);
    return index;
}

RetrievedSequence hard_retrieve(const InvertedIndex& index, std::uint32_t target_code, Timestamp event_time,
                                std::size_t k, FallbackPolicy fallback, RetrievalStats* stats) {
    if (k == 0) throw ConfigError("gsu.k must be at least 1");
    RetrievedSequence out;
    out.tag = RetrievalTag::Hard;
    std::uint64_t probes = 0;
    std::uint64_t bytes = 2 * sizeof(std::uint32_t);  // offset pair
    const auto& seq = index.sequence();
    const auto list = index.postings(target_code);
    const std::size_t visible = lower_bound_time(
        list.size(), event_time, [&](std::size_t i) { return seq.events[list[i]].timestamp; }, probes);
    bytes += probes * (sizeof(std::uint32_t) + sizeof(BehaviorEvent));

    if (visible > 0) {
        const std::size_t take = std::min(k, visible);
        out.events.reserve(take);
        for (std::size_t i = visible - take; i < visible; ++i) out.events.push_back(make_event(seq, index.items(), list[i]));
        bytes += take * (sizeof(std::uint32_t) + sizeof(BehaviorEvent));
    } else if (fallback == FallbackPolicy::Recency) {
        out.tag = RetrievalTag::Fallback;
        probes = 0;
        const std::size_t n = lower_bound_time(
            seq.events.size(), event_time, [&](std::size_t i) { return seq.events[i].timestamp; }, probes);
        const std::size_t take = std::min(k, n);
        out.events.reserve(take);
        for (std::size_t i = n - take; i < n; ++i) {
            out.events.push_back(make_event(seq, index.items(), static_cast<std::uint32_t>(i)));
        }
        bytes += (probes + take) * sizeof(BehaviorEvent);
    }
    if (stats) {
        stats->bytes_touched += bytes;
        ++stats->queries;
    }
    return out;
}

void attach_similarity(RetrievedSequence& seq, const Corpus& corpus, std::size_t target_item, RetrievalStats* stats) {
    const auto target = corpus.embedding(target_item);
    const double tn = corpus.squared_norm(target_item);
    for (auto& ev : seq.events) {
        ev.similarity = cosine_with_norms(corpus.embedding(ev.item), target, corpus.squared_norm(ev.item), tn);
    }
    if (stats) stats->bytes_touched += seq.events.size() * (corpus.meta.dim * sizeof(float) + sizeof(double));
}

void assign_buckets(RetrievedSequence& seq, const BucketConfig& config) {
    for (auto& ev : seq.events) ev.bucket = bucketize(ev.similarity, config);
}

Gsu::Gsu(const Corpus& corpus, GsuConfig config, const SemIdMap* semids, std::size_t codebook_size)
    : corpus_(corpus), config_(config) {
    if (config_.k == 0) throw ConfigError("gsu.k must be at least 1");
    if (config_.strategy != GsuStrategy::Hard) return;
    if (!semids) throw DependencyError("hard retrieval needs SemIds; run `quantize` first");
    top_code_.resize(corpus.items.size());
    for (std::size_t i = 0; i < corpus.items.size(); ++i) {
        const auto it = semids->find(corpus.items[i].item_id);
        if (it == semids->end()) throw DataError("no SemId for item " + std::to_string(corpus.items[i].item_id));
        top_code_[i] = it->second.codes.at(0);
    }
    indexes_.reserve(corpus.sequences.size());
    for (std::size_t s = 0; s < corpus.sequences.size(); ++s) {
        indexes_.push_back(build_index(corpus, s, *semids, codebook_size));
    }
}

RetrievedSequence Gsu::retrieve(std::size_t impression) const {
    const auto& imp = corpus_.impressions[impression];
    const std::size_t s = corpus_.sequence_index(imp.user_id);
    const std::size_t target = corpus_.item_index(imp.target_item_id);
    if (config_.strategy == GsuStrategy::Soft) return soft_retrieve(corpus_, s, imp.event_time, target, config_.k);
    auto out = hard_retrieve(indexes_[s], top_code_[target], imp.event_time, config_.k, config_.fallback);
    attach_similarity(out, corpus_, target);
    return out;
}

}  // namespace siren
