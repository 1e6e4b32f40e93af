#include "siren/core/synth.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numeric>
#include <random>

#include "siren/errors.hpp"
#include "siren/simd/kernels.hpp"

namespace siren {

void SynthConfig::validate() const {
    if (n_users == 0) throw ConfigError("synth.n_users must be positive");
    if (n_items == 0) throw ConfigError("synth.n_items must be positive");
    if (n_clusters < 2) throw ConfigError("synth.n_clusters must be at least 2");
    if (n_clusters > n_items) throw ConfigError("synth.n_clusters exceeds synth.n_items");
    if (dim == 0) throw ConfigError("synth.dim must be positive");
    if (min_history == 0 || min_history > max_history) {
        throw ConfigError("synth history length range must satisfy 1 <= min_history <= max_history");
    }
    if (interests_per_user == 0 || interests_per_user > n_clusters) {
        throw ConfigError("synth.interests_per_user must be in [1, n_clusters]");
    }
    auto unit = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!unit(dominant_interest_weight) || !unit(off_interest_rate) || !unit(target_interest_rate)) {
        throw ConfigError("synth probabilities must lie in [0, 1]");
    }
    if (brand_vocab == 0 || user_segment_vocab == 0 || context_vocab == 0) {
        throw ConfigError("synth vocabularies must be non-empty");
    }
    if (labels.noise_std < 0.0) throw ConfigError("synth.labels.noise_std must be non-negative");
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<float> normalized(std::span<const float> v) {
    const double n = std::sqrt(simd::squared_norm(v));
    std::vector<float> out(v.begin(), v.end());
    if (n > 0.0) {
        for (auto& x : out) x = static_cast<float>(x / n);
    }
    return out;
}

}  // namespace

double expected_click_probability(double logit_mean, double noise_std) {
    if (noise_std == 0.0) return sigmoid(logit_mean);
    constexpr double inv_sqrt_2pi = 0.39894228040143267794;
    auto f = [&](double z) { return sigmoid(logit_mean + noise_std * z) * inv_sqrt_2pi * std::exp(-0.5 * z * z); };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -12.0, 12.0, 10, 1e-13);
}

SynthResult generate_synthetic_with_truth(const SynthConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const std::size_t d = cfg.dim;
    const std::size_t G = cfg.n_clusters;

    SynthResult result;
    Corpus& corpus = result.corpus;
    SynthTruth& truth = result.truth;
    truth.n_clusters = G;

    corpus.meta.dim = d;
    corpus.meta.item_vocab = {static_cast<std::uint32_t>(cfg.n_items), cfg.brand_vocab};
    corpus.meta.user_vocab = {static_cast<std::uint32_t>(cfg.n_users), cfg.user_segment_vocab};
    corpus.meta.context_vocab = {cfg.context_vocab};
    corpus.meta.seed = cfg.seed;

    // Unit cluster centers; in high dimension random directions are nearly
    // orthogonal, so clusters are well separated.
    std::vector<std::vector<double>> centers(G, std::vector<double>(d));
    for (auto& c : centers) {
        double n2 = 0.0;
        for (auto& x : c) {
            x = normal(rng);
            n2 += x * x;
        }
        const double n = std::sqrt(n2);
        for (auto& x : c) x /= n;
    }

    truth.affinity.resize(G * G);
    for (auto& a : truth.affinity) a = normal(rng);

    truth.item_cluster.resize(cfg.n_items);
    std::vector<std::vector<std::uint32_t>> cluster_items(G);
    // Every cluster gets at least one item; the rest are assigned uniformly.
    std::vector<std::uint32_t> assignment(cfg.n_items);
    for (std::size_t i = 0; i < cfg.n_items; ++i) {
        assignment[i] = i < G ? static_cast<std::uint32_t>(i) : static_cast<std::uint32_t>(rng() % G);
    }
    std::shuffle(assignment.begin(), assignment.end(), rng);

    const double per_dim = cfg.cluster_noise / std::sqrt(static_cast<double>(d));
    std::uniform_int_distribution<std::uint32_t> brand(0, cfg.brand_vocab - 1);
    corpus.items.resize(cfg.n_items);
    for (std::size_t i = 0; i < cfg.n_items; ++i) {
        const auto g = assignment[i];
        truth.item_cluster[i] = g;
        cluster_items[g].push_back(static_cast<std::uint32_t>(i));
        auto& item = corpus.items[i];
        item.item_id = 100000 + i;
        item.id_features = {static_cast<FeatureValue>(i), brand(rng)};
        item.embedding.resize(d);
        for (std::size_t k = 0; k < d; ++k) {
            item.embedding[k] = static_cast<float>(centers[g][k] + per_dim * normal(rng));
        }
    }

    std::vector<std::vector<float>> unit_emb(cfg.n_items);
    for (std::size_t i = 0; i < cfg.n_items; ++i) unit_emb[i] = normalized(corpus.items[i].embedding);

    auto pick_from_cluster = [&](std::uint32_t g) {
        const auto& members = cluster_items[g];
        return members[rng() % members.size()];
    };
    auto pick_any = [&]() { return static_cast<std::uint32_t>(rng() % cfg.n_items); };

    std::uniform_int_distribution<std::size_t> hist_len(cfg.min_history, cfg.max_history);
    std::uniform_int_distribution<std::uint32_t> segment(0, cfg.user_segment_vocab - 1);
    std::uniform_int_distribution<std::uint32_t> hour(0, cfg.context_vocab - 1);
    std::uniform_int_distribution<Timestamp> gap(1, 5);

    std::vector<std::uint32_t> all_clusters(G);
    std::iota(all_clusters.begin(), all_clusters.end(), 0u);

    corpus.sequences.resize(cfg.n_users);
    corpus.impressions.reserve(cfg.n_users * cfg.impressions_per_user);
    for (std::size_t u = 0; u < cfg.n_users; ++u) {
        const UserId uid = 1 + u;
        const FeatureValue user_segment = segment(rng);

        // Interests: distinct clusters, the first one dominant.
        std::vector<std::uint32_t> interests(all_clusters);
        std::shuffle(interests.begin(), interests.end(), rng);
        interests.resize(cfg.interests_per_user);
        auto pick_interest = [&]() {
            if (interests.size() == 1 || unif(rng) < cfg.dominant_interest_weight) return interests[0];
            return interests[1 + rng() % (interests.size() - 1)];
        };

        auto& seq = corpus.sequences[u];
        seq.user_id = uid;
        const std::size_t n = hist_len(rng);
        std::vector<std::uint32_t> hist_items(n);
        Timestamp t = 0;
        seq.events.resize(n);
        for (std::size_t e = 0; e < n; ++e) {
            t += gap(rng);
            hist_items[e] = unif(rng) < cfg.off_interest_rate ? pick_any() : pick_from_cluster(pick_interest());
            seq.events[e] = {corpus.items[hist_items[e]].item_id, t};
        }

        const std::size_t min_visible = std::max<std::size_t>(1, n / 5);
        std::uniform_int_distribution<std::size_t> cut(min_visible, n);
        for (std::size_t k = 0; k < cfg.impressions_per_user; ++k) {
            const std::size_t visible = cut(rng);
            const Timestamp event_time =
                visible < n ? seq.events[visible].timestamp : seq.events.back().timestamp + 1;
            const std::uint32_t target =
                unif(rng) < cfg.target_interest_rate ? pick_from_cluster(pick_interest()) : pick_any();

            std::size_t anchor = 0;
            double best = -2.0;
            for (std::size_t e = 0; e < visible; ++e) {
                const double s = simd::dot(std::span<const float>(unit_emb[hist_items[e]]),
                                           std::span<const float>(unit_emb[target]));
                if (s > best) {
                    best = s;
                    anchor = e;
                }
            }
            const auto anchor_cluster = truth.item_cluster[hist_items[anchor]];
            const auto target_cluster = truth.item_cluster[target];
            const double mean = cfg.labels.bias + cfg.labels.w_sim * best +
                                cfg.labels.w_affinity * truth.affinity[anchor_cluster * G + target_cluster];
            const double p = sigmoid(mean + cfg.labels.noise_std * normal(rng));

            Impression imp;
            imp.user_id = uid;
            imp.target_item_id = corpus.items[target].item_id;
            imp.context_features = {hour(rng)};
            imp.user_features = {static_cast<FeatureValue>(u), user_segment};
            imp.label = unif(rng) < p ? 1 : 0;
            imp.event_time = event_time;
            corpus.impressions.push_back(std::move(imp));

            truth.impression_logit_mean.push_back(mean);
            truth.impression_anchor_similarity.push_back(best);
            truth.impression_anchor_cluster.push_back(anchor_cluster);
        }
    }

    corpus.finalize();
    return result;
}

Corpus generate_synthetic(const SynthConfig& config) { return generate_synthetic_with_truth(config).corpus; }

}  // namespace siren
