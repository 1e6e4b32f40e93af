#pragma once

#include <cstdint>
#include <span>

#include "siren/core/types.hpp"

namespace siren {

// Rank-statistic AUC with midranks for tied scores. Returns NaN when the
// labels are single-class.
double auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Impression-weighted mean of per-user AUC. Users with single-class labels
// contribute neither AUC nor weight. Throws DataError when no user has both
// labels.
double gauc(std::span<const UserId> users, std::span<const double> scores, std::span<const std::uint8_t> labels);

}  // namespace siren
