#include "siren/training/backward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "siren/errors.hpp"
#include "siren/simd/kernels.hpp"

namespace siren {

double bce_loss_logit(double logit, std::uint8_t label) {
    return std::max(logit, 0.0) - logit * double(label) + std::log1p(std::exp(-std::abs(logit)));
}

double bce_loss(double p, std::uint8_t label) {
    p = std::clamp(p, 1e-300, 1.0 - 0x1p-53);
    return bce_loss_logit(std::log(p) - std::log1p(-p), label);
}

double mean_bce_loss(std::span<const double> logits, std::span<const std::uint8_t> labels) {
    if (logits.size() != labels.size() || logits.empty()) throw InputError("loss needs equal, non-empty inputs");
    double s = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) s += bce_loss_logit(logits[i], labels[i]);
    return s / double(logits.size());
}

GradientSet::GradientSet(const ModelParams& params) {
    for (const auto& t : params.tensors) {
        grads_.emplace_back(t.data.size(), 0.0);
        sparse_.push_back(t.sparse);
        cols_.push_back(t.cols);
        touched_.emplace_back();
        touched_flag_.emplace_back(t.sparse ? t.rows : 0, 0);
    }
}

void GradientSet::clear() {
    for (std::size_t t = 0; t < grads_.size(); ++t) {
        if (!sparse_[t]) {
            std::fill(grads_[t].begin(), grads_[t].end(), 0.0);
            continue;
        }
        for (auto r : touched_[t]) {
            std::fill_n(grads_[t].begin() + r * cols_[t], cols_[t], 0.0);
            touched_flag_[t][r] = 0;
        }
        touched_[t].clear();
    }
}

namespace {

// Adds dh (width D) into the embedding rows that built one unified item.
void scatter_item(const ModelParams& params, std::span<const std::uint32_t> rows, std::span<const double> dh,
                  GradientSet& g) {
    const auto& lay = params.layout;
    std::size_t off = 0;
    for (std::size_t s = 0; s < lay.item_emb.size(); ++s) {
        auto row = g.row(lay.item_emb[s], rows[s]);
        simd::axpy(1.0, dh.subspan(off, row.size()), row);
        off += row.size();
    }
    if (params.config.ablation.use_semid) {
        for (std::size_t k = 0; k < params.config.prefix_depth; ++k) {
            auto row = g.row(lay.prefix, rows[lay.item_emb.size() + k]);
            simd::axpy(1.0, dh.subspan(off, row.size()), row);
            off += row.size();
        }
    }
}

}  // namespace

void backward(const ModelParams& params, const FeatureIndex& features, const Example& ex, const ForwardCache& c,
              double dlogit, GradientSet& g) {
    const auto& cfg = params.config;
    const auto& lay = params.layout;
    const std::size_t D = cfg.unified_width();
    const std::size_t A = cfg.attention_input_width();
    const std::size_t H = cfg.heads;
    const std::size_t dh = cfg.head_dim;
    const std::size_t L = ex.behaviors.size();
    const auto& st = c.attention;
    if (st.L != L || c.h.size() != L * D || c.h_t.size() != D || c.mlp.act.size() != lay.mlp_w.size()) {
        throw std::logic_error("forward cache does not match the example");
    }

    // Prediction head.
    std::vector<double> delta{dlogit};
    std::vector<double> dx;
    for (std::size_t l = lay.mlp_w.size(); l-- > 0;) {
        const auto& W = params.at(lay.mlp_w[l]);
        const auto& x = c.mlp.act[l];
        auto& gW = g[lay.mlp_w[l]];
        auto& gb = g[lay.mlp_b[l]];
        dx.assign(W.cols, 0.0);
        for (std::size_t o = 0; o < W.rows; ++o) {
            if (delta[o] == 0.0) continue;
            gb[o] += delta[o];
            simd::axpy(delta[o], std::span<const double>(x), std::span<double>(gW.data() + o * W.cols, W.cols));
            simd::axpy(delta[o], W.row(o), std::span<double>(dx));
        }
        if (l > 0) {
            for (std::size_t i = 0; i < dx.size(); ++i) {
                if (x[i] <= 0.0) dx[i] = 0.0;
            }
        }
        delta.swap(dx);
    }
    const std::vector<double>& dz = delta;  // d input of the MLP

    std::vector<double> dh_t(dz.begin() + D, dz.begin() + 2 * D);
    std::size_t off = 2 * D;
    for (std::size_t s = 0; s < lay.user_emb.size(); ++s) {
        auto row = g.row(lay.user_emb[s], feature_row(cfg.user_vocab[s], ex.user_features[s]));
        simd::axpy(1.0, std::span<const double>(dz.data() + off, row.size()), row);
        off += row.size();
    }
    for (std::size_t s = 0; s < lay.context_emb.size(); ++s) {
        auto row = g.row(lay.context_emb[s], feature_row(cfg.context_vocab[s], ex.context_features[s]));
        simd::axpy(1.0, std::span<const double>(dz.data() + off, row.size()), row);
        off += row.size();
    }

    // Interaction.
    std::vector<double> du(dz.begin(), dz.begin() + D);
    if (cfg.ablation.use_target_interaction) {
        for (std::size_t j = 0; j < D; ++j) {
            dh_t[j] += du[j] * st.u[j];
            du[j] *= c.h_t[j];
        }
    }

    // Attention. u = sum_i alpha_i h_i, alpha = mean over heads of softmax(s_h),
    // s_hi = (Wk_h^T q_h) . x_i / sqrt(dh), q_h = Wq_h x_t.
    std::vector<double> dhi_all(L * D, 0.0);
    std::vector<double> dxa(L * A, 0.0);
    std::vector<double> dx_t(A, 0.0);
    if (L > 0) {
        std::vector<double> dalpha(L);
        for (std::size_t i = 0; i < L; ++i) {
            const std::span<const double> hi(c.h.data() + i * D, D);
            dalpha[i] = simd::dot(hi, std::span<const double>(du));
            simd::axpy(st.alpha[i], std::span<const double>(du), std::span<double>(dhi_all.data() + i * D, D));
        }
        const double scale = 1.0 / std::sqrt(double(dh));
        std::vector<double> ds(L), dr(A), dq(dh);
        for (std::size_t hd = 0; hd < H; ++hd) {
            const double* a = st.a.data() + hd * L;
            double dot_a = 0.0;
            for (std::size_t i = 0; i < L; ++i) dot_a += a[i] * dalpha[i] / double(H);
            for (std::size_t i = 0; i < L; ++i) ds[i] = a[i] * (dalpha[i] / double(H) - dot_a) * scale;

            const std::span<const double> r(st.r.data() + hd * A, A);
            std::fill(dr.begin(), dr.end(), 0.0);
            for (std::size_t i = 0; i < L; ++i) {
                if (ds[i] == 0.0) continue;
                simd::axpy(ds[i], r, std::span<double>(dxa.data() + i * A, A));
                simd::axpy(ds[i], std::span<const double>(st.x.data() + i * A, A), std::span<double>(dr));
            }
            const auto& Wk = params.at(lay.key[hd]);
            const auto& Wq = params.at(lay.query[hd]);
            auto& gWk = g[lay.key[hd]];
            auto& gWq = g[lay.query[hd]];
            const double* q = st.q.data() + hd * dh;
            for (std::size_t j = 0; j < dh; ++j) {
                simd::axpy(q[j], std::span<const double>(dr), std::span<double>(gWk.data() + j * A, A));
                dq[j] = simd::dot(Wk.row(j), std::span<const double>(dr));
                simd::axpy(dq[j], std::span<const double>(st.x_t), std::span<double>(gWq.data() + j * A, A));
                simd::axpy(dq[j], Wq.row(j), std::span<double>(dx_t));
            }
        }
    }

    // Split attention inputs back into items and side embeddings.
    for (std::size_t j = 0; j < D; ++j) dh_t[j] += dx_t[j];
    if (cfg.ablation.use_simbucket) {
        auto& gts = g[lay.target_sim];
        for (std::size_t j = D; j < A; ++j) gts[j - D] += dx_t[j];
    }
    for (std::size_t i = 0; i < L; ++i) {
        std::span<double> dhi(dhi_all.data() + i * D, D);
        simd::axpy(1.0, std::span<const double>(dxa.data() + i * A, D), dhi);
        if (cfg.ablation.use_simbucket) {
            auto row = g.row(lay.bucket, c.buckets[i]);
            simd::axpy(1.0, std::span<const double>(dxa.data() + i * A + D, A - D), row);
        }
        scatter_item(params, features.item_rows(ex.behaviors[i]), dhi, g);
    }
    scatter_item(params, features.item_rows(ex.target), dh_t, g);
}

}  // namespace siren
