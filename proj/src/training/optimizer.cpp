#include "siren/training/optimizer.hpp"

#include <cmath>
#include <stdexcept>

#include "siren/errors.hpp"

namespace siren {

void OptimizerConfig::validate() const {
    if (!(dense_lr > 0.0)) throw ConfigError("training.dense_lr must be positive");
    if (!(sparse_lr > 0.0)) throw ConfigError("training.sparse_lr must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("training.beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("training.beta2 must lie in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("training.eps must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("training.weight_decay must be non-negative");
}

Optimizer::Optimizer(const ModelParams& params, OptimizerConfig config) : config_(config) {
    config_.validate();
    for (const auto& t : params.tensors) {
        m_.emplace_back(t.data.size(), 0.0);
        v_.emplace_back(t.data.size(), 0.0);
    }
}

void Optimizer::step(ModelParams& params, const GradientSet& grads) {
    if (grads.size() != params.tensors.size()) throw std::logic_error("gradient set does not match parameters");
    for (std::size_t t = 0; t < grads.size(); ++t) {
        const auto& g = grads[t];
        auto bad = [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                if (!std::isfinite(g[i])) return true;
            }
            return false;
        };
        bool nonfinite = false;
        if (grads.sparse(t)) {
            for (auto r : grads.touched(t)) nonfinite |= bad(r * grads.cols(t), (r + 1) * grads.cols(t));
        } else {
            nonfinite = bad(0, g.size());
        }
        if (nonfinite) throw NumericError("non-finite gradient in " + params.tensors[t].name + "; step rejected");
    }

    ++t_;
    const auto& c = config_;
    const double bc1 = 1.0 - std::pow(c.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(c.beta2, double(t_));
    auto update = [&](std::size_t t, std::size_t i, double lr_eff, bool dense) {
        const double g = grads[t][i];
        auto& m = m_[t][i];
        auto& v = v_[t][i];
        m = c.beta1 * m + (1.0 - c.beta1) * g;
        v = c.beta2 * v + (1.0 - c.beta2) * g * g;
        auto& p = params.tensors[t].data[i];
        if (dense) {
            p -= lr_eff * m / (std::sqrt(v) / std::sqrt(bc2) + c.eps);
        } else {
            p -= lr_eff * m / (std::sqrt(v) + c.eps);
        }
    };
    for (std::size_t t = 0; t < grads.size(); ++t) {
        auto& data = params.tensors[t].data;
        if (grads.sparse(t)) {
            const double lr_eff = c.sparse_lr * std::sqrt(bc2) / bc1;
            const std::size_t cols = grads.cols(t);
            for (auto r : grads.touched(t)) {
                for (std::size_t i = r * cols; i < (r + 1) * cols; ++i) update(t, i, lr_eff, false);
            }
        } else {
            const double decay = 1.0 - c.dense_lr * c.weight_decay;
            for (auto& p : data) p *= decay;
            for (std::size_t i = 0; i < data.size(); ++i) update(t, i, c.dense_lr / bc1, true);
        }
    }
}

}  // namespace siren
