#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "siren/similarity/similarity.hpp"
#include "siren/training/train.hpp"

namespace siren {

// Per-impression groupings. An impression's similarity is the largest
// behavior-target similarity in its retrieved sequence; impressions with an
// empty retrieval get NaN and land in bucket group B.
std::vector<double> max_retrieved_similarity(const PreparedData& data, std::span<const std::size_t> impressions);
std::vector<std::uint32_t> bucket_groups(std::span<const double> similarity, const BucketConfig& config);
// Level-1 SemId code of each impression's target item.
std::vector<std::uint32_t> semid_groups(const PreparedData& data, const SemIdMap& semids,
                                        std::span<const std::size_t> impressions);
std::vector<std::uint8_t> impression_labels(const Corpus& corpus, std::span<const std::size_t> impressions);

struct DispersionConfig {
    std::size_t min_support = 50;
    // 0 groups similarities by the model's buckets; a positive width uses
    // fixed display bins [-1, -1 + w), ... over [-1, 1] instead.
    double bin_width = 0.0;
};

struct DispersionCell {
    std::uint32_t bucket = 0;
    std::uint32_t group = 0;
    std::size_t n = 0;
    std::size_t clicks = 0;
    double ctr = 0.0;
};

struct BucketDispersion {
    std::uint32_t bucket = 0;
    double lo = 0.0, hi = 0.0;  // similarity range of the bucket
    std::size_t groups = 0;     // groups meeting min_support
    std::size_t excluded = 0;   // groups below min_support
    std::size_t n = 0;          // impressions in supported groups
    double pooled_ctr = 0.0;
    double ctr_min = 0.0, ctr_max = 0.0;
    double ctr_std = 0.0;    // population std of group CTRs
    double noise_std = 0.0;  // its expectation under one shared CTR (binomial noise only)
    double chi2 = 0.0;       // homogeneity statistic over supported groups
    double df = 0.0;
    double p_value = 1.0;
};

struct DispersionReport {
    std::vector<DispersionCell> cells;  // supported cells only
    std::vector<BucketDispersion> buckets;
    std::size_t excluded_cells = 0;
    // Pooled over buckets with at least two supported groups.
    double chi2 = 0.0;
    double df = 0.0;
    double p_value = 1.0;
    double mean_std = 0.0;
    double mean_noise_std = 0.0;
    std::string diagnostic;  // set when no bucket meets min_support
};

DispersionReport within_bucket_dispersion(std::span<const double> similarity, std::span<const std::uint32_t> groups,
                                          std::span<const std::uint8_t> labels, const BucketConfig& buckets,
                                          const DispersionConfig& config);

// Buckets as rows, groups as columns, CTR per supported cell.
std::string dispersion_table(const DispersionReport& report);
std::string dispersion_jsonl(const DispersionReport& report);

}  // namespace siren
