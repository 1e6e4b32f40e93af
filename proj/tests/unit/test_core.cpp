#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <cstring>
#include <limits>
#include <set>

#include "common.hpp"
#include "siren/core/corpus_io.hpp"
#include "siren/core/split.hpp"
#include "siren/errors.hpp"
#include "siren/util/encoding.hpp"

using namespace siren;

namespace {

std::string dir_digest(const std::filesystem::path& dir) {
    std::string all;
    for (const char* f : {"meta.json", "items.jsonl", "sequences.jsonl", "impressions.jsonl"}) {
        all += util::sha256_file(dir / f);
    }
    return all;
}

Corpus tiny_corpus() {
    Corpus c;
    c.meta.dim = 4;
    c.meta.item_vocab = {10};
    c.meta.user_vocab = {2};
    c.meta.context_vocab = {3};
    c.items = {{1, {0}, {1, 0, 0, 0}}, {2, {1}, {0, 1, 0, 0}}, {3, {2}, {0, 0, 1, 0}}};
    c.sequences = {{7, {{1, 10}, {2, 20}, {3, 30}}}};
    c.impressions = {{7, 3, {0}, {1}, 1, 25}};
    return c;
}

}  // namespace

TEST_CASE("synthetic corpus is byte-identical for the same seed") {
    const auto a = generate_synthetic(test::small_synth(7));
    const auto b = generate_synthetic(test::small_synth(7));
    CHECK(a == b);
    const auto da = test::scratch("synth_a"), db = test::scratch("synth_b");
    save_corpus(a, da);
    save_corpus(b, db);
    CHECK(dir_digest(da) == dir_digest(db));
    const auto c = generate_synthetic(test::small_synth(8));
    CHECK_FALSE(a == c);
}

TEST_CASE("corpus save/load round trip is lossless") {
    const auto a = generate_synthetic(test::small_synth());
    const auto dir = test::scratch("roundtrip");
    save_corpus(a, dir);
    const auto b = load_corpus(dir);
    CHECK(a == b);
    const auto dir2 = test::scratch("roundtrip2");
    save_corpus(b, dir2);
    CHECK(dir_digest(dir) == dir_digest(dir2));
}

TEST_CASE("embedding of the wrong dimension is a schema error") {
    auto c = tiny_corpus();
    c.items[1].embedding.pop_back();
    CHECK_THROWS_AS(c.finalize(), SchemaError);
}

TEST_CASE("empty impressions file yields a valid corpus") {
    auto c = tiny_corpus();
    c.impressions.clear();
    c.finalize();
    const auto dir = test::scratch("empty_imps");
    save_corpus(c, dir);
    const auto back = load_corpus(dir);
    CHECK(back.impressions.empty());
    CHECK(back.items.size() == 3);
}

TEST_CASE("malformed record reports its line number") {
    auto c = tiny_corpus();
    c.finalize();
    const auto dir = test::scratch("malformed");
    save_corpus(c, dir);
    std::string text = util::read_file(dir / "items.jsonl");
    const auto second = text.find('\n') + 1;
    text.insert(second, "{not json\n");
    util::write_file(dir / "items.jsonl", text);
    try {
        (void)load_corpus(dir);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    } catch (const DataError&) {
        // Count mismatch would be reported only after parsing succeeded.
        FAIL("expected a parse error");
    }
}

TEST_CASE("referential integrity and ordering are enforced") {
    auto c = tiny_corpus();
    c.sequences[0].events[1].item_id = 99;
    CHECK_THROWS_AS(c.finalize(), SchemaError);
    c = tiny_corpus();
    std::swap(c.sequences[0].events[0], c.sequences[0].events[2]);
    CHECK_THROWS_AS(c.finalize(), SchemaError);
    c = tiny_corpus();
    c.impressions[0].user_features = {5};
    CHECK_THROWS_AS(c.finalize(), SchemaError);
}

TEST_CASE("visibility excludes events at or after the impression time") {
    auto c = tiny_corpus();
    c.finalize();
    const auto& seq = c.sequences[0];
    CHECK(seq.visible_before(25).size() == 2);
    CHECK(seq.visible_before(20).size() == 1);
    CHECK(seq.visible_before(10).empty());
    CHECK(seq.visible_before(1000).size() == 3);
}

TEST_CASE("time split puts later impressions in eval") {
    const auto corpus = generate_synthetic(test::small_synth());
    SplitConfig sc;
    const auto s = split(corpus, sc);
    Timestamp max_train = std::numeric_limits<Timestamp>::min();
    Timestamp min_eval = std::numeric_limits<Timestamp>::max();
    for (auto i : s.train) max_train = std::max(max_train, corpus.impressions[i].event_time);
    for (auto i : s.eval) min_eval = std::min(min_eval, corpus.impressions[i].event_time);
    CHECK(max_train <= min_eval);
    CHECK(s.train.size() + s.eval.size() == corpus.impressions.size());

    Timestamp t_max = 0;
    for (const auto& imp : corpus.impressions) t_max = std::max(t_max, imp.event_time);
    sc.cut = t_max;
    CHECK_THROWS_AS(split(corpus, sc), ConfigError);
}

TEST_CASE("user split is a seeded partition with disjoint users") {
    const auto corpus = generate_synthetic(test::small_synth());
    SplitConfig sc;
    sc.policy = SplitPolicy::UserHoldout;
    sc.seed = 5;
    const auto a = split(corpus, sc);
    const auto b = split(corpus, sc);
    CHECK(a.train == b.train);
    CHECK(a.eval == b.eval);
    std::set<std::size_t> all(a.train.begin(), a.train.end());
    all.insert(a.eval.begin(), a.eval.end());
    CHECK(all.size() == corpus.impressions.size());
    std::set<UserId> train_users, eval_users;
    for (auto i : a.train) train_users.insert(corpus.impressions[i].user_id);
    for (auto i : a.eval) eval_users.insert(corpus.impressions[i].user_id);
    for (auto u : eval_users) CHECK(train_users.count(u) == 0);
}

TEST_CASE("synth config validation names the field") {
    auto c = test::small_synth();
    c.min_history = 100;
    c.max_history = 10;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("base64 float payload round trips and rejects garbage") {
    const std::vector<float> v{1.5f, -0.0f, 3.25e-8f, 1e30f};
    const auto text = util::encode_f32_base64(v);
    const auto back = util::decode_f32_base64(text);
    REQUIRE(back.size() == v.size());
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::memcmp(&back[i], &v[i], 4) == 0);
    CHECK_THROWS_AS(util::decode_f32_base64("!!!"), DataError);
    CHECK(util::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
