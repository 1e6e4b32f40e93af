#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "../support/oracles.hpp"
#include "common.hpp"
#include "siren/errors.hpp"
#include "siren/esu/forward.hpp"
#include "siren/esu/model.hpp"
#include "siren/util/encoding.hpp"

using namespace siren;

namespace {

void zero(ModelParams& p) {
    for (auto& t : p.tensors) std::fill(t.data.begin(), t.data.end(), 0.0);
}

std::vector<double> stack(const std::vector<std::vector<double>>& rows) {
    std::vector<double> out;
    for (const auto& r : rows) out.insert(out.end(), r.begin(), r.end());
    return out;
}

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

}  // namespace

TEST_CASE("unified representation: zeros, determinism, semantic segment") {
    oracle::TinySetup s;
    oracle::build_tiny(s, 3);
    const auto& corpus = s.synth.corpus;
    const auto& item = corpus.items[5];
    const auto& sem = s.semids.at(item.item_id);
    const auto h = unify(s.params, item, &sem);
    CHECK(h.size() == s.params.config.unified_width());
    CHECK(unify(s.params, item, &sem) == h);

    SemId other = sem;
    other.codes[0] = (other.codes[0] + 1) % 4;
    const auto h2 = unify(s.params, item, &other);
    const std::size_t id_w = s.params.config.id_width();
    CHECK(std::equal(h.begin(), h.begin() + id_w, h2.begin()));
    CHECK_FALSE(std::equal(h.begin() + id_w, h.end(), h2.begin() + id_w));

    auto zp = s.params;
    zero(zp);
    for (double v : unify(zp, item, &sem)) CHECK(v == 0.0);
}

TEST_CASE("attention contracts: L=0, L=1, uniform keys, permutation") {
    oracle::TinySetup s;
    oracle::build_tiny(s, 4);
    const auto& p = s.params;
    const std::size_t D = p.config.unified_width();
    std::mt19937_64 rng(2);
    const auto target = random_vec(D, rng);

    const auto empty = target_attention(p, {}, {}, target);
    CHECK(empty.alpha.empty());
    for (double v : empty.u) CHECK(v == 0.0);

    const auto h1 = random_vec(D, rng);
    const std::uint32_t b1[] = {2};
    const auto one = target_attention(p, h1, b1, target);
    REQUIRE(one.alpha.size() == 1);
    CHECK(one.alpha[0] == doctest::Approx(1.0));
    for (std::size_t j = 0; j < D; ++j) CHECK(one.u[j] == doctest::Approx(h1[j]));

    const std::vector<std::vector<double>> same(4, h1);
    const std::uint32_t b4[] = {1, 1, 1, 1};
    const auto uni = target_attention(p, stack(same), b4, target);
    for (double a : uni.alpha) CHECK(a == doctest::Approx(0.25));

    std::vector<std::vector<double>> rows;
    std::vector<std::uint32_t> buckets;
    for (int i = 0; i < 6; ++i) {
        rows.push_back(random_vec(D, rng));
        buckets.push_back(std::uint32_t(rng() % p.config.buckets));
    }
    const auto base = target_attention(p, stack(rows), buckets, target);
    CHECK(std::accumulate(base.alpha.begin(), base.alpha.end(), 0.0) == doctest::Approx(1.0));
    std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
    std::vector<std::vector<double>> prow;
    std::vector<std::uint32_t> pb;
    for (auto i : perm) {
        prow.push_back(rows[i]);
        pb.push_back(buckets[i]);
    }
    const auto permuted = target_attention(p, stack(prow), pb, target);
    for (std::size_t j = 0; j < D; ++j) CHECK(permuted.u[j] == doctest::Approx(base.u[j]).epsilon(1e-12));
    for (std::size_t k = 0; k < perm.size(); ++k) {
        CHECK(permuted.alpha[k] == doctest::Approx(base.alpha[perm[k]]).epsilon(1e-12));
    }

    const std::uint32_t short_buckets[] = {0};
    CHECK_THROWS_AS(target_attention(p, stack(rows), short_buckets, target), InputError);
}

TEST_CASE("target interaction arithmetic") {
    CHECK(target_interaction(std::vector<double>{1, 2}, std::vector<double>{3, -1}) == std::vector<double>{3, -2});
    CHECK(target_interaction(std::vector<double>{0, 0}, std::vector<double>{3, -1}) == std::vector<double>{0, 0});
    CHECK(target_interaction(std::vector<double>{0.5, 7}, std::vector<double>{1, 1}) == std::vector<double>{0.5, 7});
    CHECK_THROWS_AS(target_interaction(std::vector<double>{1}, std::vector<double>{1, 2}), InputError);
}

TEST_CASE("prediction head: sigmoid(0), bias monotonicity, straight-line oracle, numeric errors") {
    oracle::TinySetup s;
    oracle::build_tiny(s, 5);
    const auto& imp = s.synth.corpus.impressions[0];
    const std::size_t D = s.params.config.unified_width();
    std::mt19937_64 rng(8);
    const auto interest = random_vec(D, rng);
    const auto h_t = random_vec(D, rng);

    auto zp = s.params;
    zero(zp);
    CHECK(predict(zp, interest, h_t, imp.user_features, imp.context_features) == 0.5);
    double prev = 0.0;
    auto& last_bias = zp.at(zp.layout.mlp_b.back()).data[0];
    for (double b = -20; b <= 20; b += 2.5) {
        last_bias = b;
        const double y = predict(zp, interest, h_t, imp.user_features, imp.context_features);
        CHECK(y > prev);
        prev = y;
    }

    // Independent recomputation of the MLP.
    const auto& p = s.params;
    std::vector<double> x(interest);
    x.insert(x.end(), h_t.begin(), h_t.end());
    for (std::size_t sl = 0; sl < p.layout.user_emb.size(); ++sl) {
        const auto row = p.at(p.layout.user_emb[sl]).row(feature_row(p.config.user_vocab[sl], imp.user_features[sl]));
        x.insert(x.end(), row.begin(), row.end());
    }
    for (std::size_t sl = 0; sl < p.layout.context_emb.size(); ++sl) {
        const auto row =
            p.at(p.layout.context_emb[sl]).row(feature_row(p.config.context_vocab[sl], imp.context_features[sl]));
        x.insert(x.end(), row.begin(), row.end());
    }
    for (std::size_t l = 0; l < p.layout.mlp_w.size(); ++l) {
        const auto& W = p.at(p.layout.mlp_w[l]);
        const auto& b = p.at(p.layout.mlp_b[l]).data;
        std::vector<double> y(W.rows);
        for (std::size_t o = 0; o < W.rows; ++o) {
            double acc = b[o];
            for (std::size_t i = 0; i < W.cols; ++i) acc += W.data[o * W.cols + i] * x[i];
            y[o] = (l + 1 < p.layout.mlp_w.size()) ? std::max(acc, 0.0) : acc;
        }
        x = y;
    }
    const double want = 1.0 / (1.0 + std::exp(-x[0]));
    CHECK(predict(p, interest, h_t, imp.user_features, imp.context_features) == doctest::Approx(want).epsilon(1e-14));

    auto bad = s.params;
    bad.at(bad.layout.mlp_w[0]).data[0] = INFINITY;
    try {
        (void)predict(bad, interest, h_t, imp.user_features, imp.context_features);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
    }
}

TEST_CASE("forward: L=0 contract, duplicates, determinism, early fusion") {
    oracle::TinySetup s;
    oracle::build_tiny(s, 6);
    const auto& corpus = s.synth.corpus;
    const FeatureIndex features(corpus, s.params, &s.semids);
    ForwardCache cache;

    const auto& empty = s.batch[0];
    REQUIRE(empty.behaviors.empty());
    const double p0 = forward(s.params, features, empty, cache);
    const auto h_t = unify(s.params, corpus.items[empty.target], &s.semids.at(corpus.items[empty.target].item_id));
    const std::vector<double> zeros(h_t.size(), 0.0);
    CHECK(p0 == predict(s.params, zeros, h_t, empty.user_features, empty.context_features));

    const auto& dup = s.batch[3];  // contains a repeated item
    const double p3 = forward(s.params, features, dup, cache);
    CHECK(std::accumulate(cache.attention.alpha.begin(), cache.attention.alpha.end(), 0.0) == doctest::Approx(1.0));
    for (double a : cache.attention.alpha) CHECK(a >= 0.0);
    ForwardCache again;
    CHECK(forward(s.params, features, dup, again) == p3);

    // Changing only the SemIds changes both keys and values.
    auto semids = s.semids;
    for (auto& [id, sem] : semids) sem.codes[0] = (sem.codes[0] + 1) % 4;
    const FeatureIndex shifted(corpus, s.params, &semids);
    ForwardCache other;
    forward(s.params, shifted, dup, other);
    CHECK(other.attention.u != cache.attention.u);
    CHECK(other.attention.alpha != cache.attention.alpha);
}

TEST_CASE("ablation switches shape the model") {
    oracle::TinySetup s;
    oracle::build_tiny(s, 7, Ablation{false, false, false});
    const auto& cfg = s.params.config;
    CHECK(cfg.semantic_width() == 0);
    CHECK(cfg.attention_input_width() == cfg.unified_width());
    CHECK(s.params.find("prefix_emb") == nullptr);
    CHECK(s.params.find("bucket_emb") == nullptr);
    const FeatureIndex features(s.synth.corpus, s.params, nullptr);
    ForwardCache cache;
    forward(s.params, features, s.batch[3], cache);
    CHECK(cache.interest == cache.attention.u);
}

TEST_CASE("checkpoint round trip is bit-exact and validated") {
    oracle::TinySetup s;
    oracle::build_tiny(s, 8);
    s.params.at(0).data[1] = -0.0;
    s.params.at(0).data[2] = 0x1.fffffffffffffp-3;
    const auto dir = test::scratch("ckpt");
    save_checkpoint(s.params, dir / "a.ckpt");
    const auto back = load_checkpoint(dir / "a.ckpt");
    CHECK(back == s.params);
    CHECK(std::signbit(back.at(0).data[1]));
    save_checkpoint(back, dir / "b.ckpt");
    CHECK(util::sha256_file(dir / "a.ckpt") == util::sha256_file(dir / "b.ckpt"));
    CHECK(config_hash(back.config) == config_hash(s.params.config));

    auto bytes = util::read_file(dir / "a.ckpt");
    util::write_file(dir / "short.ckpt", bytes.substr(0, bytes.size() - 8));
    CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt"), DataError);
    bytes[0] = 'X';
    util::write_file(dir / "magic.ckpt", bytes);
    CHECK_THROWS_AS(load_checkpoint(dir / "magic.ckpt"), DataError);
}

TEST_CASE("model config validation and JSON round trip") {
    const auto corpus = generate_synthetic(test::small_synth());
    auto cfg = model_config_for(corpus.meta);
    cfg.validate();
    CHECK(model_config_from_json(model_config_json(cfg)) == cfg);
    CHECK(cfg.unified_width() == cfg.id_width() + cfg.prefix_depth * cfg.prefix_width);
    CHECK(cfg.mlp_input_width() == 2 * cfg.unified_width() + cfg.user_feature_width() + cfg.context_feature_width());

    auto bad = cfg;
    bad.heads = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.prefix_depth = 4;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.item_widths = {4, 4, 4};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("out-of-vocabulary feature values use the OOV row and are counted") {
    oracle::TinySetup s;
    oracle::build_tiny(s, 9);
    ItemRecord item = s.synth.corpus.items[0];
    item.id_features[1] = 999;
    std::size_t oov = 0;
    const auto rows = item_feature_rows(s.params, item, &s.semids.at(item.item_id), &oov);
    CHECK(oov == 1);
    CHECK(rows[1] == s.params.config.item_vocab[1]);
    CHECK(feature_row(4, 7) == 4);
    CHECK(feature_row(4, 2) == 2);
}
