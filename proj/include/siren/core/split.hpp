#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "siren/core/types.hpp"

namespace siren {

enum class SplitPolicy { TimeHoldout, UserHoldout };

struct SplitConfig {
    SplitPolicy policy = SplitPolicy::TimeHoldout;
    // Time holdout: impressions with event_time > cut go to eval. Without an
    // explicit cut, the (1 - eval_fraction) quantile of event times is used.
    std::optional<Timestamp> cut;
    // User holdout: this fraction of users (seeded) goes to eval.
    double eval_fraction = 0.2;
    std::uint64_t seed = 0;
};

// Impression indices into corpus.impressions, each side in corpus order.
struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> eval;
};

// Throws ConfigError when either side comes out empty.
Split split(const Corpus& corpus, const SplitConfig& config);

}  // namespace siren
