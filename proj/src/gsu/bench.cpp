#include "siren/gsu/bench.hpp"

#include <chrono>
#include <json.hpp>

#include "siren/errors.hpp"
#include "siren/similarity/similarity.hpp"

namespace siren {

namespace {

double quantile_ns(std::vector<double> v, double q) { return v.empty() ? 0.0 : percentile(std::move(v), q); }

template <typename Fn>
CostReport run(const std::string& name, std::size_t queries, Fn&& query) {
    using clock = std::chrono::steady_clock;
    CostReport r;
    r.strategy = name;
    std::vector<double> times;
    times.reserve(queries);
    RetrievalStats stats;
    std::size_t returned = 0;
    for (std::size_t q = 0; q < queries; ++q) {
        const auto t0 = clock::now();
        returned += query(q, stats);
        const auto t1 = clock::now();
        times.push_back(double(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count()));
    }
    r.queries = queries;
    r.p50_ns = quantile_ns(times, 50.0);
    r.p99_ns = quantile_ns(std::move(times), 99.0);
    r.bytes_touched = queries ? double(stats.bytes_touched) / double(queries) : 0.0;
    r.mean_returned = queries ? double(returned) / double(queries) : 0.0;
    return r;
}

}  // namespace

std::vector<CostReport> bench_retrieval(const Corpus& corpus, const SemIdMap& semids, std::size_t codebook_size,
                                        const BenchConfig& config) {
    const std::size_t queries = std::min(config.max_queries, corpus.impressions.size());
    std::vector<std::size_t> seq_of(queries), target_of(queries);
    for (std::size_t q = 0; q < queries; ++q) {
        seq_of[q] = corpus.sequence_index(corpus.impressions[q].user_id);
        target_of[q] = corpus.item_index(corpus.impressions[q].target_item_id);
    }

    std::vector<InvertedIndex> indexes;
    indexes.reserve(corpus.sequences.size());
    std::uint64_t hard_bytes = 0, soft_bytes = 0;
    for (std::size_t s = 0; s < corpus.sequences.size(); ++s) {
        indexes.push_back(build_index(corpus, s, semids, codebook_size));
        hard_bytes += indexes.back().memory_bytes();
        soft_bytes += corpus.sequences[s].events.size() * (corpus.meta.dim * sizeof(float) + sizeof(double));
    }
    std::vector<std::uint32_t> top_code(corpus.items.size());
    for (std::size_t i = 0; i < corpus.items.size(); ++i) {
        const auto it = semids.find(corpus.items[i].item_id);
        if (it == semids.end()) throw DataError("no SemId for item " + std::to_string(corpus.items[i].item_id));
        top_code[i] = it->second.codes.at(0);
    }

    auto soft = run("soft", queries, [&](std::size_t q, RetrievalStats& st) {
        return soft_retrieve(corpus, seq_of[q], corpus.impressions[q].event_time, target_of[q], config.k, &st)
            .events.size();
    });
    soft.index_bytes = soft_bytes;

    auto hard = run("hard", queries, [&](std::size_t q, RetrievalStats& st) {
        auto out = hard_retrieve(indexes[seq_of[q]], top_code[target_of[q]], corpus.impressions[q].event_time,
                                 config.k, config.fallback, &st);
        attach_similarity(out, corpus, target_of[q], &st);
        return out.events.size();
    });
    hard.index_bytes = hard_bytes;
    return {soft, hard};
}

std::string cost_report_jsonl(const std::vector<CostReport>& reports) {
    std::string out;
    for (const auto& r : reports) {
        nlohmann::ordered_json j = {{"strategy", r.strategy},
                                    {"p50_ns", r.p50_ns},
                                    {"p99_ns", r.p99_ns},
                                    {"bytes_touched", r.bytes_touched},
                                    {"index_bytes", r.index_bytes},
                                    {"queries", r.queries},
                                    {"mean_returned", r.mean_returned}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace siren
