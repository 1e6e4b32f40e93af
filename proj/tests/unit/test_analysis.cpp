#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "common.hpp"
#include "siren/analysis/dispersion.hpp"
#include "siren/analysis/information.hpp"
#include "siren/analysis/representation.hpp"
#include "siren/core/split.hpp"
#include "siren/errors.hpp"

using namespace siren;

namespace {

// Definition-based MI straight from a count table.
double mi_ref(const std::vector<std::vector<double>>& t) {
    double n = 0;
    for (const auto& r : t) {
        for (double c : r) n += c;
    }
    std::vector<double> pg(t.size(), 0), py(t[0].size(), 0);
    for (std::size_t g = 0; g < t.size(); ++g) {
        for (std::size_t y = 0; y < t[g].size(); ++y) {
            pg[g] += t[g][y] / n;
            py[y] += t[g][y] / n;
        }
    }
    double mi = 0;
    for (std::size_t g = 0; g < t.size(); ++g) {
        for (std::size_t y = 0; y < t[g].size(); ++y) {
            const double p = t[g][y] / n;
            if (p > 0) mi += p * std::log(p / (pg[g] * py[y]));
        }
    }
    return mi;
}

DiscreteJoint joint_from(const std::vector<std::vector<double>>& t) {
    DiscreteJoint j;
    j.groups = t.size();
    j.labels = 2;
    for (const auto& r : t) j.counts.insert(j.counts.end(), r.begin(), r.end());
    return j;
}

}  // namespace

TEST_CASE("mutual information closed forms") {
    const std::vector<std::uint32_t> g{0, 1, 0, 1};
    const std::vector<std::uint8_t> y{0, 1, 0, 1};
    CHECK(mutual_information(make_joint(g, y)) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(information_gain(make_joint(g, y)) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

    const std::vector<std::uint32_t> gi{0, 0, 1, 1};
    const std::vector<std::uint8_t> yi{0, 1, 0, 1};
    CHECK(mutual_information(make_joint(gi, yi)) == doctest::Approx(0.0).epsilon(1e-15));

    const std::vector<std::uint8_t> constant{1, 1, 1, 1};
    CHECK(information_gain(make_joint(g, constant)) == 0.0);
    const std::vector<std::uint32_t> one_group{0, 0, 0, 0};
    CHECK(information_gain(make_joint(one_group, y)) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(label_entropy(make_joint(g, y)) == doctest::Approx(std::log(2.0)));
    CHECK_THROWS_AS(make_joint(g, std::vector<std::uint8_t>{0, 1}), InputError);
    CHECK_THROWS_AS(mutual_information(DiscreteJoint{2, 2, {0, 0, 0, 0}}), InputError);
}

TEST_CASE("MI and information gain agree with the definition on random tables") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> cnt(0, 9), groups(1, 6);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<std::vector<double>> t(groups(rng), std::vector<double>(2));
        double total = 0;
        for (auto& r : t) {
            for (auto& c : r) total += c = cnt(rng);
        }
        if (total == 0) continue;
        const auto j = joint_from(t);
        CHECK(std::abs(mutual_information(j) - mi_ref(t)) < 1e-12);
        CHECK(std::abs(information_gain(j) - mi_ref(t)) < 1e-12);
    }
}

TEST_CASE("merging groups never increases MI") {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> cnt(0, 20);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::vector<double>> t(5, std::vector<double>(2));
        for (auto& r : t) {
            for (auto& c : r) c = cnt(rng) + 1;
        }
        auto j = joint_from(t);
        double prev = mutual_information(j);
        while (j.groups > 1) {
            j = merge_groups(j, 0, j.groups - 1);
            const double now = mutual_information(j);
            CHECK(now <= prev + 1e-12);
            prev = now;
        }
        CHECK(prev == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("permutation null is seeded and flags real dependence") {
    std::mt19937_64 rng(5);
    std::vector<std::uint32_t> g(2000);
    std::vector<std::uint8_t> indep(2000), dep(2000);
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = std::uint32_t(rng() % 4);
        indep[i] = std::uint8_t(rng() % 2);
        dep[i] = std::uint8_t((rng() % 10) < (g[i] < 2 ? 2u : 7u));
    }
    const auto a = permutation_null(g, dep, 100, 1);
    const auto b = permutation_null(g, dep, 100, 1);
    CHECK(a.p99 == b.p99);
    CHECK(a.observed > a.p99);
    CHECK(a.p_value < 0.02);
    const auto n = permutation_null(g, indep, 100, 1);
    CHECK(n.p_value > 0.01);
}

TEST_CASE("dispersion: naive recount, single group, diagnostics and table shape") {
    std::mt19937_64 rng(6);
    const BucketConfig bc{4, {0.0, 1.0, 0, false}};
    std::vector<double> sim;
    std::vector<std::uint32_t> grp;
    std::vector<std::uint8_t> lab;
    for (int i = 0; i < 4000; ++i) {
        sim.push_back(double(rng() % 1000) / 1000.0);
        grp.push_back(std::uint32_t(rng() % 3));
        lab.push_back(std::uint8_t(rng() % 3 == 0));
    }
    sim.push_back(std::nan(""));
    grp.push_back(0);
    lab.push_back(1);
    const auto rep = within_bucket_dispersion(sim, grp, lab, bc, {50, 0.0});

    std::map<std::pair<std::uint32_t, std::uint32_t>, std::pair<std::size_t, std::size_t>> naive;
    for (std::size_t i = 0; i + 1 < sim.size(); ++i) {
        auto& c = naive[{std::uint32_t(std::min(3.0, std::floor(sim[i] * 4))), grp[i]}];
        ++c.first;
        c.second += lab[i];
    }
    CHECK(rep.cells.size() == naive.size());
    for (const auto& c : rep.cells) {
        const auto& want = naive.at({c.bucket, c.group});
        CHECK(c.n == want.first);
        CHECK(c.clicks == want.second);
    }
    CHECK(rep.buckets.size() == 4);

    const std::vector<std::uint32_t> single(sim.size(), 0);
    const auto one = within_bucket_dispersion(sim, single, lab, bc, {50, 0.0});
    for (const auto& b : one.buckets) CHECK(b.ctr_max - b.ctr_min == 0.0);

    const auto none = within_bucket_dispersion(sim, grp, lab, bc, {100000, 0.0});
    CHECK(none.buckets.empty());
    CHECK_FALSE(none.diagnostic.empty());

    const auto table = dispersion_table(rep);
    CHECK(std::count(table.begin(), table.end(), '\n') == 4 + 2);  // header, 4 buckets, summary
    CHECK(table.find("g0") != std::string::npos);
    CHECK(table.find("g2") != std::string::npos);
}

TEST_CASE("dispersion matches binomial noise without heterogeneity and exceeds it with") {
    std::mt19937_64 rng(7);
    const BucketConfig bc{5, {0.0, 1.0, 0, false}};
    std::vector<double> sim;
    std::vector<std::uint32_t> grp;
    std::vector<std::uint8_t> flat, het;
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 40000; ++i) {
        const double s = u(rng);
        const std::uint32_t g = std::uint32_t(rng() % 8);
        const double p = 0.2 + 0.5 * s;
        sim.push_back(s);
        grp.push_back(g);
        flat.push_back(u(rng) < p);
        het.push_back(u(rng) < std::clamp(p + (g % 2 ? 0.15 : -0.15), 0.0, 1.0));
    }
    // Groups are independent of similarity, so without a group effect every
    // cell in a bucket shares one expected CTR.
    const auto f = within_bucket_dispersion(sim, grp, flat, bc, {50, 0.0});
    const auto h = within_bucket_dispersion(sim, grp, het, bc, {50, 0.0});
    CHECK(f.p_value > 0.001);
    CHECK(f.mean_std < 1.5 * f.mean_noise_std);
    CHECK(h.p_value < 1e-9);
    CHECK(h.mean_std > 2.0 * h.mean_noise_std);
}

TEST_CASE("representation analyses on a small corpus") {
    auto sc = test::small_synth(12);
    sc.n_users = 60;
    const auto corpus = generate_synthetic(sc);
    const auto sp = split(corpus, SplitConfig{});
    const auto cb = train_codebooks(corpus.embedding_matrix(), corpus.meta.dim, {3, 8, 10, 2});
    const auto semids = encode_corpus(cb, corpus);
    const PreparedData data(corpus, GsuConfig{GsuStrategy::Soft, 10, FallbackPolicy::Recency});
    auto mc = model_config_for(corpus.meta);
    mc.codebook_size = 8;
    mc.hidden = {16, 8};
    mc.range = calibrate_range(corpus, CalibrationConfig{5000, 0.5, 99.5, 1}, sp.train);
    const auto vocab = PrefixVocabulary::from_semids(semids, 3, PrefixPacker(8, 3));
    const auto params = init_params(mc, vocab);
    const FeatureIndex features(corpus, params, &semids);

    const auto iv = interest_vectors(params, features, data, sp.eval);
    CHECK(iv.size() == sp.eval.size() * mc.unified_width());

    MiConfig mi;
    mi.clusters = {2, 4};
    mi.permutations = 20;
    const auto a = mi_vs_clusters(params, features, data, sp.eval, mi);
    const auto b = mi_vs_clusters(params, features, data, sp.eval, mi);
    REQUIRE(a.size() == 2);
    CHECK(a[0].mi == b[0].mi);
    CHECK(a[1].null_p99 == b[1].null_p99);
    mi.clusters = {sp.eval.size() + 1};
    CHECK_THROWS_AS(mi_vs_clusters(params, features, data, sp.eval, mi), DegenerateError);

    TrainConfig tc;
    tc.batch_size = 64;
    const std::size_t counts[] = {1, 10};
    const auto s1 = bucket_sweep(data, sp, &semids, mc, vocab, tc, counts);
    const auto s2 = bucket_sweep(data, sp, &semids, mc, vocab, tc, counts);
    REQUIRE(s1.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(s1[i].gauc == s2[i].gauc);
        CHECK(s1[i].gauc >= 0.0);
        CHECK(s1[i].gauc <= 1.0);
    }
    CHECK(sweep_jsonl(s1) == sweep_jsonl(s2));
}
