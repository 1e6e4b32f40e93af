#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "common.hpp"
#include "siren/errors.hpp"
#include "siren/similarity/similarity.hpp"

using namespace siren;

TEST_CASE("cosine identities") {
    const std::vector<float> x{0.3f, -1.2f, 2.0f};
    const std::vector<float> neg{-0.3f, 1.2f, -2.0f};
    CHECK(cosine(x, x) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cosine(x, neg) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(cosine(std::vector<float>{1, 0}, std::vector<float>{0, 1}) == 0.0);

    std::mt19937_64 rng(1);
    std::normal_distribution<float> g;
    for (int t = 0; t < 200; ++t) {
        std::vector<float> a(8), b(8), as(8), bs(8);
        for (auto& v : a) v = g(rng);
        for (auto& v : b) v = g(rng);
        for (int i = 0; i < 8; ++i) {
            as[i] = a[i] * 4.0f;
            bs[i] = b[i] * 0.5f;
        }
        const double c = cosine(a, b);
        CHECK(c >= -1.0);
        CHECK(c <= 1.0);
        CHECK(c == doctest::Approx(cosine(b, a)).epsilon(1e-14));
        CHECK(c == doctest::Approx(cosine(as, bs)).epsilon(1e-6));
    }
}

TEST_CASE("zero-norm operands score 0 and are counted") {
    reset_zero_norm_count();
    CHECK(cosine(std::vector<float>{0, 0}, std::vector<float>{1, 2}) == 0.0);
    CHECK(zero_norm_count() == 1);
    CHECK_THROWS_AS(cosine(std::vector<float>{1}, std::vector<float>{1, 2}), InputError);
}

TEST_CASE("percentile interpolates between order statistics") {
    const std::vector<double> v{4, 1, 3, 2};
    CHECK(percentile(v, 0) == 1.0);
    CHECK(percentile(v, 100) == 4.0);
    CHECK(percentile(v, 50) == doctest::Approx(2.5));
}

TEST_CASE("calibration: degenerate, exact extremes and sampling accuracy") {
    auto corpus = generate_synthetic(test::small_synth());
    CalibrationConfig cfg;
    cfg.sample_size = 200000;
    cfg.seed = 4;

    // Exhaustive distribution of the sampled pair: uniform impression among
    // those with history, then a uniform visible behavior.
    std::vector<std::pair<double, double>> pairs;  // (similarity, weight)
    std::size_t pool = 0;
    for (const auto& imp : corpus.impressions) {
        if (corpus.sequences[corpus.sequence_index(imp.user_id)].visible_count(imp.event_time) > 0) ++pool;
    }
    double lo = 2, hi = -2;
    for (const auto& imp : corpus.impressions) {
        const auto s = corpus.sequence_index(imp.user_id);
        const auto n = corpus.sequences[s].visible_count(imp.event_time);
        const auto t = corpus.item_index(imp.target_item_id);
        for (std::size_t e = 0; e < n; ++e) {
            const double c = cosine(corpus.embedding(corpus.sequence_items(s)[e]), corpus.embedding(t));
            pairs.emplace_back(c, 1.0 / double(pool) / double(n));
            lo = std::min(lo, c);
            hi = std::max(hi, c);
        }
    }
    std::sort(pairs.begin(), pairs.end());
    auto quantile = [&](double p) {
        double acc = 0;
        for (const auto& [s, w] : pairs) {
            acc += w;
            if (acc >= p) return s;
        }
        return pairs.back().first;
    };
    cfg.lo_pct = 5;
    cfg.hi_pct = 95;
    const auto r = calibrate_range(corpus, cfg);
    CHECK(r.s_min == doctest::Approx(quantile(0.05)).epsilon(0.02));
    CHECK(r.s_max == doctest::Approx(quantile(0.95)).epsilon(0.02));
    CHECK(calibrate_range(corpus, cfg) == r);

    cfg.lo_pct = 0;
    cfg.hi_pct = 100;
    const auto ext = calibrate_range(corpus, cfg);
    CHECK(ext.s_min >= lo);
    CHECK(ext.s_max <= hi);
    CHECK(ext.s_min < lo + 0.05);
    CHECK(ext.s_max > hi - 0.05);

    for (auto& item : corpus.items) std::fill(item.embedding.begin(), item.embedding.end(), 1.0f);
    corpus.finalize();
    cfg.sample_size = 100;
    const auto flat = calibrate_range(corpus, cfg);
    CHECK(flat.widened);
    CHECK(flat.s_max - flat.s_min == doctest::Approx(kRangeEpsilon));
    CHECK(flat.s_max <= 1.0);

    cfg.sample_size = 1;
    CHECK_THROWS_AS(calibrate_range(corpus, cfg), ConfigError);
}

TEST_CASE("bucketize boundaries and clipping") {
    const BucketConfig b40{40, {0.0, 1.0, 0, false}};
    CHECK(bucketize(0.0, b40) == 0);
    CHECK(bucketize(1.0, b40) == 39);
    CHECK(bucketize(0.5, b40) == 20);
    CHECK(bucketize(-0.7, b40) == 0);
    CHECK(bucketize(5.0, b40) == 39);
    const BucketConfig b1{1, {-1.0, 1.0, 0, false}};
    for (double s = -1.0; s <= 1.0; s += 0.125) CHECK(bucketize(s, b1) == 0);
    CHECK_THROWS_AS((BucketConfig{0, {}}.validate()), ConfigError);
    CHECK_THROWS_AS((BucketConfig{4, {0.5, 0.5, 0, false}}.validate()), ConfigError);
}

TEST_CASE("bucket embedding is a row lookup") {
    const std::vector<double> table{0, 1, 2, 3, 4, 5};
    const auto r = bucket_embedding(table, 2, 1);
    CHECK(r[0] == 2);
    CHECK(r[1] == 3);
    const std::vector<double> zeros(6, 0.0);
    for (double v : bucket_embedding(zeros, 2, 2)) CHECK(v == 0.0);
    CHECK_THROWS_AS(bucket_embedding(table, 2, 3), std::logic_error);
}
