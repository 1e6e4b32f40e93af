#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "siren/core/types.hpp"

namespace siren {

// Cosine similarity clamped to [-1, 1]. A zero-norm operand yields 0 and
// bumps zero_norm_count(); cold items without embeddings must still score.
double cosine(std::span<const float> a, std::span<const float> b);

// Same arithmetic as cosine() with both squared norms supplied by the caller.
double cosine_with_norms(std::span<const float> a, std::span<const float> b, double a_sqnorm, double b_sqnorm);

std::uint64_t zero_norm_count();
void reset_zero_norm_count();

struct SimRange {
    double s_min = -1.0;
    double s_max = 1.0;
    std::size_t sample_size = 0;
    bool widened = false;  // calibration saw a single value and widened it

    bool operator==(const SimRange&) const = default;
};

struct CalibrationConfig {
    std::size_t sample_size = 100000;
    double lo_pct = 0.5;
    double hi_pct = 99.5;
    std::uint64_t seed = 0;
};

constexpr double kRangeEpsilon = 1e-6;

// Percentiles (linear interpolation between order statistics) of cosine
// similarity over randomly sampled (visible behavior, target) pairs drawn
// from `impressions` (indices into corpus.impressions; all when empty).
// Throws DataError when there is nothing to sample.
SimRange calibrate_range(const Corpus& corpus, const CalibrationConfig& config,
                         std::span<const std::size_t> impressions = {});

// Linear-interpolated percentile of an unsorted sample, p in [0, 100].
double percentile(std::vector<double> values, double p);

struct BucketConfig {
    std::size_t buckets = 40;
    SimRange range;

    void validate() const;  // throws ConfigError
};

// floor((s - s_min) / (s_max - s_min) * B), clipped into [0, B-1].
std::uint32_t bucketize(double s, const BucketConfig& config);

// Row q of a B x width table. q outside [0, B) is an internal invariant
// violation (bucketize never produces one) and throws std::logic_error.
std::span<const double> bucket_embedding(std::span<const double> table, std::size_t width, std::size_t q);

}  // namespace siren
