#pragma once

#include <span>
#include <vector>

#include "siren/esu/model.hpp"
#include "siren/gsu/retrieval.hpp"

namespace siren {

// h = concat(id slot embeddings, K prefix embeddings), width D.
std::vector<double> unify(const ModelParams& params, const ItemRecord& item, const SemId* semid,
                          std::size_t* oov_hits = nullptr);
// Same, from precomputed table rows (FeatureIndex::item_rows layout).
void unify_rows(const ModelParams& params, std::span<const std::uint32_t> rows, std::span<double> out);

struct AttentionState {
    std::size_t L = 0;
    std::vector<double> x_t;    // h_t ++ target similarity vector
    std::vector<double> x;      // L x A, h_i ++ bucket embedding
    std::vector<double> q;      // heads x head_dim
    std::vector<double> r;      // heads x A, key projection folded onto the query
    std::vector<double> a;      // heads x L, per-head softmax
    std::vector<double> alpha;  // L, head average
    std::vector<double> u;      // D
};

// Scaled dot-product target attention. `behaviors` is L x D row-major; the
// keys see each h_i next to its bucket embedding, the values are the plain
// h_i. L = 0 gives u = 0 and an empty alpha. Throws InputError on mismatched
// lengths or widths.
void target_attention(const ModelParams& params, std::span<const double> behaviors,
                      std::span<const std::uint32_t> buckets, std::span<const double> target, AttentionState& out);

struct AttentionResult {
    std::vector<double> u;
    std::vector<double> alpha;
};
AttentionResult target_attention(const ModelParams& params, std::span<const double> behaviors,
                                 std::span<const std::uint32_t> buckets, std::span<const double> target);

// Element-wise u * h. Throws InputError on a width mismatch.
std::vector<double> target_interaction(std::span<const double> u, std::span<const double> h);

struct MlpState {
    std::vector<std::vector<double>> act;  // act[0] = input, act[l+1] = layer l output (post-ReLU)
    double logit = 0.0;
};

// MLP over concat(interest, h_t, user embedding, context embedding). Returns
// the logit; throws NumericError naming the first layer with a non-finite
// activation.
double predict_logit(const ModelParams& params, std::span<const double> interest, std::span<const double> h_t,
                     std::span<const FeatureValue> user_features, std::span<const FeatureValue> context_features,
                     MlpState* state = nullptr);
double predict(const ModelParams& params, std::span<const double> interest, std::span<const double> h_t,
               std::span<const FeatureValue> user_features, std::span<const FeatureValue> context_features);

double sigmoid(double z);

// One impression with its retrieved behaviors, everything referenced by
// corpus item index.
struct Example {
    std::uint32_t target = 0;
    std::span<const std::uint32_t> behaviors;
    std::span<const double> similarities;  // aligned with behaviors
    std::span<const FeatureValue> user_features;
    std::span<const FeatureValue> context_features;
    std::uint8_t label = 0;
};

// Everything backward() needs from a forward pass. Buffers are reused
// between calls.
struct ForwardCache {
    std::vector<double> h_t;
    std::vector<double> h;                 // L x D
    std::vector<std::uint32_t> buckets;    // L
    AttentionState attention;
    std::vector<double> interest;          // u * h_t, or u without target interaction
    MlpState mlp;
    double probability = 0.0;
};

// unify -> target_attention -> target_interaction -> predict.
double forward(const ModelParams& params, const FeatureIndex& features, const Example& example, ForwardCache& cache);

// Convenience for a single impression retrieved by the GSU.
double forward(const ModelParams& params, const FeatureIndex& features, const Corpus& corpus,
               const Impression& impression, const RetrievedSequence& retrieved, ForwardCache& cache);

// Embedding row for a user or context feature value (OOV row when out of range).
std::uint32_t feature_row(std::uint32_t vocab, FeatureValue value);

}  // namespace siren
