#include "siren/esu/forward.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "siren/errors.hpp"
#include "siren/simd/kernels.hpp"

namespace siren {

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

std::uint32_t feature_row(std::uint32_t vocab, FeatureValue value) { return value < vocab ? value : vocab; }

void unify_rows(const ModelParams& params, std::span<const std::uint32_t> rows, std::span<double> out) {
    const auto& cfg = params.config;
    const auto& L = params.layout;
    std::size_t off = 0;
    for (std::size_t s = 0; s < L.item_emb.size(); ++s) {
        const auto row = params.at(L.item_emb[s]).row(rows[s]);
        std::copy(row.begin(), row.end(), out.begin() + off);
        off += row.size();
    }
    if (cfg.ablation.use_semid) {
        const auto& table = params.at(L.prefix);
        for (std::size_t k = 0; k < cfg.prefix_depth; ++k) {
            const auto row = table.row(rows[L.item_emb.size() + k]);
            std::copy(row.begin(), row.end(), out.begin() + off);
            off += row.size();
        }
    }
}

std::vector<double> unify(const ModelParams& params, const ItemRecord& item, const SemId* semid,
                          std::size_t* oov_hits) {
    const auto rows = item_feature_rows(params, item, semid, oov_hits);
    std::vector<double> h(params.config.unified_width());
    unify_rows(params, rows, h);
    return h;
}

void target_attention(const ModelParams& params, std::span<const double> behaviors,
                      std::span<const std::uint32_t> buckets, std::span<const double> target, AttentionState& st) {
    const auto& cfg = params.config;
    const auto& lay = params.layout;
    const std::size_t D = cfg.unified_width();
    const std::size_t A = cfg.attention_input_width();
    const std::size_t H = cfg.heads;
    const std::size_t dh = cfg.head_dim;
    if (target.size() != D) throw InputError("target width " + std::to_string(target.size()) + " != " + std::to_string(D));
    if (behaviors.size() % D != 0) throw InputError("behavior matrix width does not match D");
    const std::size_t L = behaviors.size() / D;
    if (cfg.ablation.use_simbucket && buckets.size() != L) {
        throw InputError("behaviors and buckets differ in length (" + std::to_string(L) + " vs " +
                         std::to_string(buckets.size()) + ")");
    }
    st.L = L;
    st.u.assign(D, 0.0);
    st.alpha.assign(L, 0.0);
    st.x_t.resize(A);
    std::copy(target.begin(), target.end(), st.x_t.begin());
    st.x.resize(L * A);
    for (std::size_t i = 0; i < L; ++i) {
        std::copy_n(behaviors.begin() + i * D, D, st.x.begin() + i * A);
    }
    if (cfg.ablation.use_simbucket) {
        const auto& tsim = params.at(lay.target_sim).data;
        std::copy(tsim.begin(), tsim.end(), st.x_t.begin() + D);
        const auto& table = params.at(lay.bucket);
        for (std::size_t i = 0; i < L; ++i) {
            const auto row = bucket_embedding(table.data, table.cols, buckets[i]);
            std::copy(row.begin(), row.end(), st.x.begin() + i * A + D);
        }
    }
    st.q.assign(H * dh, 0.0);
    st.r.assign(H * A, 0.0);
    st.a.assign(H * L, 0.0);
    if (L == 0) return;

    const double scale = 1.0 / std::sqrt(double(dh));
    std::vector<double> s(L);
    for (std::size_t hd = 0; hd < H; ++hd) {
        const auto& Wq = params.at(lay.query[hd]);
        const auto& Wk = params.at(lay.key[hd]);
        std::span<double> q(st.q.data() + hd * dh, dh);
        std::span<double> r(st.r.data() + hd * A, A);
        for (std::size_t j = 0; j < dh; ++j) {
            q[j] = simd::dot(Wq.row(j), std::span<const double>(st.x_t));
            simd::axpy(q[j], Wk.row(j), r);
        }
        double mx = -INFINITY;
        for (std::size_t i = 0; i < L; ++i) {
            s[i] = scale * simd::dot(std::span<const double>(r), std::span<const double>(st.x.data() + i * A, A));
            mx = std::max(mx, s[i]);
        }
        double z = 0.0;
        for (std::size_t i = 0; i < L; ++i) {
            s[i] = std::exp(s[i] - mx);
            z += s[i];
        }
        for (std::size_t i = 0; i < L; ++i) {
            st.a[hd * L + i] = s[i] / z;
            st.alpha[i] += st.a[hd * L + i] / double(H);
        }
    }
    for (std::size_t i = 0; i < L; ++i) {
        simd::axpy(st.alpha[i], behaviors.subspan(i * D, D), std::span<double>(st.u));
    }
}

AttentionResult target_attention(const ModelParams& params, std::span<const double> behaviors,
                                 std::span<const std::uint32_t> buckets, std::span<const double> target) {
    AttentionState st;
    target_attention(params, behaviors, buckets, target, st);
    return {std::move(st.u), std::move(st.alpha)};
}

std::vector<double> target_interaction(std::span<const double> u, std::span<const double> h) {
    if (u.size() != h.size()) {
        throw InputError("interaction widths differ (" + std::to_string(u.size()) + " vs " + std::to_string(h.size()) + ")");
    }
    std::vector<double> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] * h[i];
    return out;
}

double predict_logit(const ModelParams& params, std::span<const double> interest, std::span<const double> h_t,
                     std::span<const FeatureValue> user_features, std::span<const FeatureValue> context_features,
                     MlpState* state) {
    const auto& cfg = params.config;
    const auto& lay = params.layout;
    const std::size_t D = cfg.unified_width();
    if (interest.size() != D || h_t.size() != D) throw InputError("prediction input widths do not match D");
    if (user_features.size() != cfg.user_vocab.size()) throw InputError("user feature slot count mismatch");
    if (context_features.size() != cfg.context_vocab.size()) throw InputError("context feature slot count mismatch");

    MlpState local;
    MlpState& st = state ? *state : local;
    const std::size_t layers = lay.mlp_w.size();
    st.act.resize(layers);
    auto& in = st.act[0];
    in.clear();
    in.reserve(cfg.mlp_input_width());
    in.insert(in.end(), interest.begin(), interest.end());
    in.insert(in.end(), h_t.begin(), h_t.end());
    for (std::size_t s = 0; s < user_features.size(); ++s) {
        const auto row = params.at(lay.user_emb[s]).row(feature_row(cfg.user_vocab[s], user_features[s]));
        in.insert(in.end(), row.begin(), row.end());
    }
    for (std::size_t s = 0; s < context_features.size(); ++s) {
        const auto row = params.at(lay.context_emb[s]).row(feature_row(cfg.context_vocab[s], context_features[s]));
        in.insert(in.end(), row.begin(), row.end());
    }

    for (std::size_t l = 0; l < layers; ++l) {
        const auto& W = params.at(lay.mlp_w[l]);
        const auto& b = params.at(lay.mlp_b[l]);
        const std::span<const double> x(st.act[l]);
        const bool last = l + 1 == layers;
        std::vector<double> y(W.rows);
        for (std::size_t o = 0; o < W.rows; ++o) {
            double v = b.data[o] + simd::dot(W.row(o), x);
            if (!std::isfinite(v)) throw NumericError("non-finite activation in MLP layer " + std::to_string(l));
            y[o] = last ? v : std::max(v, 0.0);
        }
        if (last) {
            st.logit = y[0];
        } else {
            st.act[l + 1] = std::move(y);
        }
    }
    return st.logit;
}

double predict(const ModelParams& params, std::span<const double> interest, std::span<const double> h_t,
               std::span<const FeatureValue> user_features, std::span<const FeatureValue> context_features) {
    return sigmoid(predict_logit(params, interest, h_t, user_features, context_features));
}

double forward(const ModelParams& params, const FeatureIndex& features, const Example& ex, ForwardCache& c) {
    const auto& cfg = params.config;
    const std::size_t D = cfg.unified_width();
    const std::size_t L = ex.behaviors.size();
    if (ex.similarities.size() != L) throw InputError("behaviors and similarities differ in length");
    c.h_t.resize(D);
    unify_rows(params, features.item_rows(ex.target), c.h_t);
    c.h.resize(L * D);
    c.buckets.resize(L);
    const BucketConfig bc{cfg.buckets, cfg.range};
    for (std::size_t i = 0; i < L; ++i) {
        unify_rows(params, features.item_rows(ex.behaviors[i]), std::span<double>(c.h.data() + i * D, D));
        c.buckets[i] = bucketize(ex.similarities[i], bc);
    }
    target_attention(params, c.h, c.buckets, c.h_t, c.attention);
    if (cfg.ablation.use_target_interaction) {
        c.interest = target_interaction(c.attention.u, c.h_t);
    } else {
        c.interest = c.attention.u;
    }
    predict_logit(params, c.interest, c.h_t, ex.user_features, ex.context_features, &c.mlp);
    c.probability = sigmoid(c.mlp.logit);
    return c.probability;
}

double forward(const ModelParams& params, const FeatureIndex& features, const Corpus& corpus,
               const Impression& impression, const RetrievedSequence& retrieved, ForwardCache& cache) {
    std::vector<std::uint32_t> items;
    std::vector<double> sims;
    for (const auto& ev : retrieved.events) {
        if (ev.timestamp >= impression.event_time) throw InputError("retrieved event is not before the impression");
        items.push_back(ev.item);
        sims.push_back(ev.similarity);
    }
    Example ex;
    ex.target = static_cast<std::uint32_t>(corpus.item_index(impression.target_item_id));
    ex.behaviors = items;
    ex.similarities = sims;
    ex.user_features = impression.user_features;
    ex.context_features = impression.context_features;
    ex.label = impression.label;
    return forward(params, features, ex, cache);
}

}  // namespace siren
