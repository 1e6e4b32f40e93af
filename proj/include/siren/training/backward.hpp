#pragma once

#include <span>
#include <vector>

#include "siren/esu/forward.hpp"

namespace siren {

// Binary cross-entropy from a logit, stable for any finite logit.
double bce_loss_logit(double logit, std::uint8_t label);
// Same loss from a probability; 0 and 1 are clamped away from the boundary.
double bce_loss(double probability, std::uint8_t label);
double mean_bce_loss(std::span<const double> logits, std::span<const std::uint8_t> labels);

// One gradient buffer per parameter tensor. Embedding tables record which
// rows a batch touched so clearing and the sparse optimizer step only visit
// those rows.
class GradientSet {
public:
    explicit GradientSet(const ModelParams& params);

    std::vector<double>& operator[](std::size_t t) { return grads_[t]; }
    const std::vector<double>& operator[](std::size_t t) const { return grads_[t]; }
    std::size_t size() const { return grads_.size(); }

    std::span<double> row(std::size_t t, std::size_t r) {
        if (sparse_[t] && !touched_flag_[t][r]) {
            touched_flag_[t][r] = 1;
            touched_[t].push_back(static_cast<std::uint32_t>(r));
        }
        return {grads_[t].data() + r * cols_[t], cols_[t]};
    }
    bool sparse(std::size_t t) const { return sparse_[t]; }
    std::size_t cols(std::size_t t) const { return cols_[t]; }
    // Touched rows in first-touch order; meaningful for sparse tensors only.
    const std::vector<std::uint32_t>& touched(std::size_t t) const { return touched_[t]; }

    void clear();

private:
    std::vector<std::vector<double>> grads_;
    std::vector<bool> sparse_;
    std::vector<std::size_t> cols_;
    std::vector<std::vector<std::uint32_t>> touched_;
    std::vector<std::vector<std::uint8_t>> touched_flag_;
};

// Accumulates dLoss/dParams into `grads` given dLoss/dlogit for one example
// whose forward pass filled `cache`. Throws std::logic_error when the cache
// does not belong to this example.
void backward(const ModelParams& params, const FeatureIndex& features, const Example& example,
              const ForwardCache& cache, double dlogit, GradientSet& grads);

}  // namespace siren
