#pragma once

#include <cstdint>
#include <vector>

#include "siren/core/types.hpp"

namespace siren {

// Planted click model for one impression:
//   logit = bias + w_sim * cos(e_anchor, e_target)
//         + w_affinity * A[cluster(anchor), cluster(target)] + noise_std * N(0,1)
//   label ~ Bernoulli(sigmoid(logit))
// where `anchor` is the visible behavior most similar to the target (the
// user's matching interest) and A is a seeded G x G affinity matrix with
// standard-normal entries. With w_affinity = 0 the click rate depends on the
// target only through the anchor similarity; with w_affinity > 0 cluster
// identity carries label information that similarity alone does not.
struct LabelModel {
    double bias = -1.0;
    double w_sim = 3.0;
    double w_affinity = 2.0;
    double noise_std = 0.5;
};

struct SynthConfig {
    std::uint64_t seed = 7;
    std::size_t n_users = 2000;
    std::size_t n_items = 5000;
    std::size_t n_clusters = 32;
    std::size_t dim = 128;
    // Norm of the isotropic perturbation added to unit cluster centers.
    double cluster_noise = 0.6;
    std::size_t min_history = 100;
    std::size_t max_history = 300;
    std::size_t impressions_per_user = 50;
    std::size_t interests_per_user = 3;
    double dominant_interest_weight = 0.6;
    // Probability a history event is drawn from outside the user's interests.
    double off_interest_rate = 0.1;
    // Probability an impression's target comes from the user's interests.
    double target_interest_rate = 0.5;
    std::uint32_t brand_vocab = 100;
    std::uint32_t user_segment_vocab = 16;
    std::uint32_t context_vocab = 24;
    LabelModel labels;

    void validate() const;  // throws ConfigError
};

struct SynthTruth {
    std::vector<std::uint32_t> item_cluster;      // by item index
    std::vector<double> affinity;                 // G x G, row = anchor cluster
    std::vector<double> impression_logit_mean;    // planted logit without noise
    std::vector<double> impression_anchor_similarity;
    std::vector<std::uint32_t> impression_anchor_cluster;
    std::size_t n_clusters = 0;
};

struct SynthResult {
    Corpus corpus;
    SynthTruth truth;
};

// Item feature slots: [item index, brand]; user slots: [user index, segment];
// context slots: [hour]. Item ids are 100000 + index, user ids 1 + index.
// Same config -> identical corpus (and identical serialized bytes).
SynthResult generate_synthetic_with_truth(const SynthConfig& config);
Corpus generate_synthetic(const SynthConfig& config);

// E[sigmoid(mean + noise_std * Z)], Z ~ N(0,1), by Gauss-Kronrod quadrature.
double expected_click_probability(double logit_mean, double noise_std);

}  // namespace siren
