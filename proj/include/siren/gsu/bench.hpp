#pragma once

#include <string>
#include <vector>

#include "siren/gsu/retrieval.hpp"

namespace siren {

struct CostReport {
    std::string strategy;
    double p50_ns = 0.0;
    double p99_ns = 0.0;
    double bytes_touched = 0.0;  // mean per query
    std::uint64_t index_bytes = 0;
    std::size_t queries = 0;
    double mean_returned = 0.0;
};

struct BenchConfig {
    std::size_t k = 50;
    std::size_t max_queries = 2000;
    FallbackPolicy fallback = FallbackPolicy::Recency;
};

// Times soft and hard retrieval over the same impressions (corpus order, up
// to max_queries), single-threaded. Hard retrieval includes attaching target
// similarities to the events it returns, since the ESU consumes them.
// index_bytes: soft keeps each history event's embedding and norm resident;
// hard keeps the per-user posting lists.
std::vector<CostReport> bench_retrieval(const Corpus& corpus, const SemIdMap& semids, std::size_t codebook_size,
                                        const BenchConfig& config);

// {"strategy","p50_ns","p99_ns","bytes_touched","index_bytes"} plus
// "queries" and "mean_returned", one record per line.
std::string cost_report_jsonl(const std::vector<CostReport>& reports);

}  // namespace siren
