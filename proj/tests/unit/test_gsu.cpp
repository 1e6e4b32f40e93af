#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "../support/oracles.hpp"
#include "common.hpp"
#include "siren/errors.hpp"
#include "siren/gsu/bench.hpp"
#include "siren/gsu/retrieval.hpp"

using namespace siren;

namespace {

// One user whose history items have the given embeddings (item i has id
// i + 1, timestamp 10 * (i + 1)), plus a target item appended last.
Corpus history_corpus(const std::vector<std::vector<float>>& history, std::vector<float> target) {
    Corpus c;
    c.meta.dim = target.size();
    c.meta.item_vocab = {1000};
    c.meta.user_vocab = {1};
    c.meta.context_vocab = {1};
    BehaviorSequence seq{1, {}};
    for (std::size_t i = 0; i < history.size(); ++i) {
        c.items.push_back({ItemId(i + 1), {0}, history[i]});
        seq.events.push_back({ItemId(i + 1), Timestamp(10 * (i + 1))});
    }
    c.items.push_back({ItemId(history.size() + 1), {0}, std::move(target)});
    c.sequences.push_back(std::move(seq));
    c.finalize();
    return c;
}

std::vector<std::uint32_t> positions(const RetrievedSequence& r) {
    std::vector<std::uint32_t> out;
    for (const auto& e : r.events) out.push_back(e.position);
    return out;
}

}  // namespace

TEST_CASE("soft retrieval: short history, dominance and brute-force agreement") {
    const auto corpus = history_corpus({{1, 0}, {0, 1}, {1, 1}}, {1, 0});
    const auto all = soft_retrieve(corpus, 0, 1000, 3, 50);
    CHECK(all.events.size() == 3);
    CHECK(all.tag == RetrievalTag::Soft);

    const auto dom = history_corpus({{0, 1}, {0, -1}, {1, 0}, {0, 2}}, {1, 0});
    const auto one = soft_retrieve(dom, 0, 1000, 4, 1);
    REQUIRE(one.events.size() == 1);
    CHECK(one.events[0].item_id == 3);
    CHECK(one.events[0].similarity == doctest::Approx(1.0));

    std::mt19937_64 rng(11);
    std::normal_distribution<float> g;
    std::vector<std::vector<float>> hist(500, std::vector<float>(6));
    for (auto& h : hist) {
        for (auto& v : h) v = g(rng);
    }
    std::vector<float> t(6);
    for (auto& v : t) v = g(rng);
    const auto big = history_corpus(hist, t);
    const auto r = soft_retrieve(big, 0, 10 * 400, 500, 50);
    CHECK(positions(r) == oracle::soft_topk_positions(big, 0, 10 * 400, 500, 50));
    for (const auto& e : r.events) CHECK(e.timestamp < 4000);
    for (std::size_t i = 1; i < r.events.size(); ++i) CHECK(r.events[i - 1].timestamp <= r.events[i].timestamp);
}

TEST_CASE("soft retrieval ranks ties by recency") {
    const auto corpus = history_corpus({{1, 0}, {1, 0}, {1, 0}}, {1, 0});
    const auto r = soft_retrieve(corpus, 0, 1000, 3, 2);
    CHECK(positions(r) == std::vector<std::uint32_t>{1, 2});
}

TEST_CASE("inverted index partitions positions and reports missing SemIds") {
    const auto corpus = generate_synthetic(test::small_synth());
    const auto cb = train_codebooks(corpus.embedding_matrix(), corpus.meta.dim, {2, 8, 10, 1});
    const auto semids = encode_corpus(cb, corpus);
    for (std::size_t s = 0; s < corpus.sequences.size(); ++s) {
        const auto index = build_index(corpus, s, semids, 8);
        std::set<std::uint32_t> seen;
        std::size_t total = 0;
        for (std::uint32_t c = 0; c < index.codes(); ++c) {
            const auto p = index.postings(c);
            total += p.size();
            for (std::size_t i = 0; i < p.size(); ++i) {
                seen.insert(p[i]);
                CHECK(semids.at(corpus.sequences[s].events[p[i]].item_id).codes[0] == c);
                if (i > 0) CHECK(corpus.sequences[s].events[p[i - 1]].timestamp <= corpus.sequences[s].events[p[i]].timestamp);
            }
        }
        CHECK(total == corpus.sequences[s].events.size());
        CHECK(seen.size() == total);
    }

    auto partial = semids;
    partial.erase(corpus.sequences[0].events[0].item_id);
    CHECK_THROWS_AS(build_index(corpus, 0, partial, 8), DataError);
}

TEST_CASE("hard retrieval examples") {
    const auto corpus = history_corpus({{1, 0}, {0, 1}, {1, 0}, {1, 0}, {0, 1}}, {1, 0});
    SemIdMap semids;
    for (ItemId id = 1; id <= 6; ++id) semids[id] = SemId{{corpus.items[id - 1].embedding[0] > 0 ? 0u : 1u}};
    const auto index = build_index(corpus, 0, semids, 4);

    const auto none = hard_retrieve(index, 3, 1000, 50, FallbackPolicy::None);
    CHECK(none.events.empty());
    const auto fb = hard_retrieve(index, 3, 1000, 2, FallbackPolicy::Recency);
    CHECK(fb.tag == RetrievalTag::Fallback);
    CHECK(positions(fb) == std::vector<std::uint32_t>{3, 4});

    const auto three = hard_retrieve(index, 0, 1000, 50, FallbackPolicy::Recency);
    CHECK(three.tag == RetrievalTag::Hard);
    CHECK(positions(three) == std::vector<std::uint32_t>{0, 2, 3});
    const auto visible = hard_retrieve(index, 0, 30, 50, FallbackPolicy::Recency);
    CHECK(positions(visible) == std::vector<std::uint32_t>{0});

    const auto empty = history_corpus({}, {1, 0});
    const auto empty_index = build_index(empty, 0, semids, 4);
    CHECK(empty_index.size() == 0);
    CHECK(hard_retrieve(empty_index, 0, 1000, 5, FallbackPolicy::Recency).events.empty());

    auto single = semids;
    for (auto& [id, s] : single) s.codes[0] = 2;
    const auto one_list = build_index(corpus, 0, single, 4);
    CHECK(one_list.postings(2).size() == 5);
}

TEST_CASE("hard retrieval keeps the k most recent of many matches") {
    std::vector<std::vector<float>> hist(300, {1, 0});
    const auto corpus = history_corpus(hist, {1, 0});
    SemIdMap semids;
    for (ItemId id = 1; id <= 301; ++id) semids[id] = SemId{{id % 5 == 0 ? 1u : 0u}};
    const auto index = build_index(corpus, 0, semids, 2);
    const Timestamp t = 10 * 250;
    const auto r = hard_retrieve(index, 1, t, 50, FallbackPolicy::Recency);
    CHECK(positions(r) == oracle::hard_filter_positions(corpus, 0, semids, 1, t, 50, FallbackPolicy::Recency));
    CHECK(r.events.size() == 49);  // ids 5, 10, ..., 245 are visible
}

TEST_CASE("bench report is well formed when k exceeds the history") {
    const auto corpus = generate_synthetic(test::small_synth());
    const auto cb = train_codebooks(corpus.embedding_matrix(), corpus.meta.dim, {2, 8, 10, 1});
    const auto semids = encode_corpus(cb, corpus);
    BenchConfig bc;
    bc.k = 10000;
    bc.max_queries = 50;
    const auto reports = bench_retrieval(corpus, semids, 8, bc);
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].strategy == "soft");
    CHECK(reports[1].strategy == "hard");
    for (const auto& r : reports) {
        CHECK(r.queries == 50);
        CHECK(r.p50_ns <= r.p99_ns);
        CHECK(r.mean_returned <= 60.0);
    }
    const auto text = cost_report_jsonl(reports);
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    CHECK(text.find("\"bytes_touched\"") != std::string::npos);
}
