#pragma once

#include <cstdint>
#include <vector>

#include "siren/esu/model.hpp"
#include "siren/training/backward.hpp"

namespace siren {

struct OptimizerConfig {
    double dense_lr = 2e-4;
    double sparse_lr = 2e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;  // dense tensors only

    void validate() const;  // throws ConfigError
};

// Dense tensors: AdamW with decoupled weight decay,
//   p <- p - lr*wd*p;  p <- p - (lr/bc1) * m / (sqrt(v)/sqrt(bc2) + eps).
// Embedding tables: lazy Adam on the rows a batch touched,
//   p <- p - lr*sqrt(bc2)/bc1 * m / (sqrt(v) + eps),
// moments of untouched rows left alone. bc1 = 1 - beta1^t, bc2 = 1 - beta2^t
// with t the global step count.
class Optimizer {
public:
    Optimizer(const ModelParams& params, OptimizerConfig config);

    // Rejects the whole step (nothing is modified) when any gradient entry is
    // non-finite, throwing NumericError naming the tensor.
    void step(ModelParams& params, const GradientSet& grads);

    std::uint64_t steps() const { return t_; }
    const OptimizerConfig& config() const { return config_; }

private:
    OptimizerConfig config_;
    std::uint64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace siren
