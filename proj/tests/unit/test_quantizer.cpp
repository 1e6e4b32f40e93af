#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "common.hpp"
#include "siren/errors.hpp"
#include "siren/quantizer/codebooks.hpp"
#include "siren/quantizer/kmeans.hpp"
#include "siren/quantizer/prefix.hpp"
#include "siren/util/encoding.hpp"

using namespace siren;

namespace {

std::vector<float> random_points(std::size_t n, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> g;
    std::vector<float> out(n * dim);
    for (auto& v : out) v = g(rng);
    return out;
}

double sqdist(std::span<const float> a, std::span<const float> b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (double(a[i]) - b[i]) * (double(a[i]) - b[i]);
    return s;
}

}  // namespace

TEST_CASE("kmeans with k=1 puts the centroid at the mean") {
    const auto pts = random_points(50, 3, 1);
    const auto r = kmeans(pts, 3, {1, 10, 0});
    for (std::size_t j = 0; j < 3; ++j) {
        double mean = 0;
        for (std::size_t i = 0; i < 50; ++i) mean += pts[i * 3 + j];
        CHECK(r.centroids[j] == doctest::Approx(mean / 50).epsilon(1e-6));
    }
}

TEST_CASE("kmeans recovers two separated blobs and is deterministic") {
    auto pts = random_points(200, 2, 2);
    for (std::size_t i = 0; i < 100; ++i) pts[i * 2] += 50.0f;
    const auto a = kmeans(pts, 2, {2, 25, 9});
    const auto b = kmeans(pts, 2, {2, 25, 9});
    CHECK(a.assignment == b.assignment);
    CHECK(a.centroids == b.centroids);
    for (std::size_t i = 1; i < 100; ++i) CHECK(a.assignment[i] == a.assignment[0]);
    for (std::size_t i = 101; i < 200; ++i) CHECK(a.assignment[i] == a.assignment[100]);
    CHECK(a.assignment[0] != a.assignment[100]);
}

TEST_CASE("kmeans rejects degenerate and non-finite input") {
    std::vector<float> same(20, 1.0f);
    CHECK_THROWS_AS(kmeans(same, 2, {3, 5, 0}), DegenerateError);
    auto pts = random_points(10, 2, 3);
    pts[4] = std::nanf("");
    CHECK_THROWS_AS(kmeans(pts, 2, {2, 5, 0}), InputError);
}

TEST_CASE("exactly C distinct points with M=1 have zero level error") {
    const auto pts = random_points(8, 4, 4);
    const auto cb = train_codebooks(pts, 4, {1, 8, 20, 0});
    CHECK(cb.level_mse[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("per-level error is non-increasing and training is deterministic") {
    const auto corpus = generate_synthetic(test::small_synth());
    const QuantizerConfig qc{3, 16, 20, 5};
    const auto a = train_codebooks(corpus.embedding_matrix(), corpus.meta.dim, qc);
    const auto b = train_codebooks(corpus.embedding_matrix(), corpus.meta.dim, qc);
    CHECK(a == b);
    CHECK(a.level_mse[0] >= a.level_mse[1]);
    CHECK(a.level_mse[1] >= a.level_mse[2]);
    const auto dir = test::scratch("codebooks");
    save_codebooks(a, dir / "a.bin");
    save_codebooks(b, dir / "b.bin");
    CHECK(util::sha256_file(dir / "a.bin") == util::sha256_file(dir / "b.bin"));
    CHECK(load_codebooks(dir / "a.bin") == a);
}

TEST_CASE("encode: centroid maps to itself, ties go low, reconstruction beats level 1") {
    const auto corpus = generate_synthetic(test::small_synth());
    const auto dim = corpus.meta.dim;
    const auto cb1 = train_codebooks(corpus.embedding_matrix(), dim, {1, 16, 20, 1});
    for (std::uint32_t c = 0; c < 16; ++c) {
        const auto cen = cb1.centroid(0, c);
        CHECK(encode(cb1, std::vector<float>(cen.begin(), cen.end())).codes[0] == c);
    }

    const auto cb = train_codebooks(corpus.embedding_matrix(), dim, {3, 16, 20, 1});
    for (std::size_t i = 0; i < corpus.items.size(); ++i) {
        const auto x = corpus.embedding(i);
        const auto id = encode(cb, x);
        REQUIRE(id.codes.size() == 3);
        double best = INFINITY;
        for (std::size_t c = 0; c < 16; ++c) best = std::min(best, sqdist(x, cb.centroid(0, c)));
        CHECK(sqdist(x, reconstruct(cb, id)) <= best + 1e-9);
    }

    Codebooks tie;
    tie.levels = 1;
    tie.size = 2;
    tie.dim = 1;
    tie.centroids = {-1.0f, 1.0f};
    tie.level_mse = {0.0};
    CHECK(encode(tie, std::vector<float>{0.0f}).codes[0] == 0);
    CHECK_THROWS_AS(encode(tie, std::vector<float>{0.0f, 1.0f}), InputError);
}

TEST_CASE("identical embeddings share a SemId; map file round trips") {
    const auto corpus = generate_synthetic(test::small_synth());
    const auto cb = train_codebooks(corpus.embedding_matrix(), corpus.meta.dim, {3, 8, 10, 2});
    const auto x = corpus.embedding(0);
    CHECK(encode(cb, x) == encode(cb, std::vector<float>(x.begin(), x.end())));
    const auto map = encode_corpus(cb, corpus);
    std::vector<ItemId> order;
    for (const auto& it : corpus.items) order.push_back(it.item_id);
    const auto dir = test::scratch("semids");
    save_semid_map(map, order, dir / "s.txt");
    CHECK(load_semid_map(dir / "s.txt") == map);
    util::write_file(dir / "bad.txt", "1 2 3\n2 x\n");
    CHECK_THROWS_AS(load_semid_map(dir / "bad.txt"), ParseError);
}

TEST_CASE("prefix tokens follow the nested prefix structure") {
    const PrefixPacker packer(8, 3);
    const SemId id{{3, 1, 4}};
    const auto t2 = prefix_tokens(id, 2, packer);
    REQUIRE(t2.size() == 2);
    const std::uint32_t p1[] = {3};
    const std::uint32_t p2[] = {3, 1};
    CHECK(t2[0].key == packer.pack(p1));
    CHECK(t2[1].key == packer.pack(p2));
    const auto t1 = prefix_tokens(id, 1, packer);
    REQUIRE(t1.size() == 1);
    CHECK(t1[0] == t2[0]);
    const auto t3 = prefix_tokens(id, 3, packer);
    CHECK(std::equal(t2.begin(), t2.end(), t3.begin()));
    CHECK_THROWS_AS(prefix_tokens(SemId{{1, 2}}, 3, packer), ConfigError);
    CHECK(prefix_tokens(SemId{{3, 1, 4}}, 2, packer) == prefix_tokens(SemId{{3, 1, 7}}, 2, packer));
}

TEST_CASE("prefix packing is injective across depths") {
    const PrefixPacker packer(16, 3);
    std::set<std::uint64_t> keys;
    std::size_t total = 0;
    for (std::uint32_t a = 0; a < 16; ++a) {
        const std::uint32_t p1[] = {a};
        keys.insert(packer.pack(p1));
        ++total;
        for (std::uint32_t b = 0; b < 16; ++b) {
            const std::uint32_t p2[] = {a, b};
            keys.insert(packer.pack(p2));
            ++total;
            for (std::uint32_t c = 0; c < 16; ++c) {
                const std::uint32_t p3[] = {a, b, c};
                keys.insert(packer.pack(p3));
                ++total;
            }
        }
    }
    CHECK(keys.size() == total);
    CHECK_THROWS_AS(PrefixPacker(1u << 20, 3), ConfigError);
}

TEST_CASE("semantic embedding concatenates prefix rows with an OOV row") {
    const PrefixPacker packer(4, 2);
    SemIdMap map{{1, SemId{{0, 1}}}, {2, SemId{{0, 2}}}};
    const auto vocab = PrefixVocabulary::from_semids(map, 2, packer);
    CHECK(vocab.rows() == 4);  // (0), (0,1), (0,2), OOV
    const std::size_t w = 2;
    std::vector<double> table(vocab.rows() * w);
    for (std::size_t i = 0; i < table.size(); ++i) table[i] = double(i);

    const auto a = semantic_embedding(vocab, table, w, prefix_tokens(map[1], 2, packer));
    const auto b = semantic_embedding(vocab, table, w, prefix_tokens(map[2], 2, packer));
    REQUIRE(a.size() == 4);
    CHECK(a[0] == b[0]);
    CHECK(a[1] == b[1]);
    CHECK(a[2] != b[2]);

    const auto k1 = semantic_embedding(vocab, table, w, prefix_tokens(map[1], 1, packer));
    CHECK(k1.size() == w);
    const auto unseen = prefix_tokens(SemId{{3, 3}}, 2, packer);
    const auto o = semantic_embedding(vocab, table, w, unseen);
    CHECK(o[0] == table[vocab.oov_row() * w]);
    const std::vector<double> zeros(table.size(), 0.0);
    for (double v : semantic_embedding(vocab, zeros, w, unseen)) CHECK(v == 0.0);
}
