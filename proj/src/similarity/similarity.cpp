#include "siren/similarity/similarity.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <stdexcept>

#include "siren/errors.hpp"
#include "siren/simd/kernels.hpp"

namespace siren {

namespace {
std::atomic<std::uint64_t> g_zero_norm{0};
}

std::uint64_t zero_norm_count() { return g_zero_norm.load(std::memory_order_relaxed); }
void reset_zero_norm_count() { g_zero_norm.store(0, std::memory_order_relaxed); }

double cosine(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw InputError("cosine: dimension mismatch");
    return cosine_with_norms(a, b, simd::squared_norm(a), simd::squared_norm(b));
}

double cosine_with_norms(std::span<const float> a, std::span<const float> b, double na, double nb) {
    if (na == 0.0 || nb == 0.0) {
        g_zero_norm.fetch_add(1, std::memory_order_relaxed);
        return 0.0;
    }
    const double c = simd::dot(a, b) / std::sqrt(na * nb);
    return std::clamp(c, -1.0, 1.0);
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw InputError("percentile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * double(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - double(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

SimRange calibrate_range(const Corpus& corpus, const CalibrationConfig& config,
                         std::span<const std::size_t> impressions) {
    if (config.sample_size < 2) throw ConfigError("calibration sample_size must be at least 2");
    if (!(config.lo_pct >= 0.0 && config.lo_pct < config.hi_pct && config.hi_pct <= 100.0)) {
        throw ConfigError("calibration percentiles must satisfy 0 <= lo < hi <= 100");
    }
    std::vector<std::size_t> pool;
    if (impressions.empty()) {
        pool.resize(corpus.impressions.size());
        for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    } else {
        pool.assign(impressions.begin(), impressions.end());
    }
    // Only impressions with a non-empty visible history can contribute pairs.
    std::erase_if(pool, [&](std::size_t i) {
        const auto& imp = corpus.impressions[i];
        return corpus.sequences[corpus.sequence_index(imp.user_id)].visible_count(imp.event_time) == 0;
    });
    if (pool.empty()) throw DataError("calibration: no impression with a visible behavior history");

    std::mt19937_64 rng(config.seed);
    std::vector<double> sims;
    sims.reserve(config.sample_size);
    for (std::size_t k = 0; k < config.sample_size; ++k) {
        const auto& imp = corpus.impressions[pool[rng() % pool.size()]];
        const std::size_t s = corpus.sequence_index(imp.user_id);
        const std::size_t visible = corpus.sequences[s].visible_count(imp.event_time);
        const std::uint32_t behavior = corpus.sequence_items(s)[rng() % visible];
        sims.push_back(cosine(corpus.embedding(behavior), corpus.embedding(corpus.item_index(imp.target_item_id))));
    }

    SimRange r;
    r.sample_size = sims.size();
    r.s_min = percentile(sims, config.lo_pct);
    r.s_max = percentile(std::move(sims), config.hi_pct);
    if (r.s_max - r.s_min < kRangeEpsilon) {
        r.widened = true;
        r.s_max = std::min(1.0, r.s_min + kRangeEpsilon);
        r.s_min = r.s_max - kRangeEpsilon;
    }
    return r;
}

void BucketConfig::validate() const {
    if (buckets == 0) throw ConfigError("similarity.buckets must be at least 1");
    if (!(range.s_min < range.s_max)) throw ConfigError("similarity range requires s_min < s_max");
    if (range.s_min < -1.0 || range.s_max > 1.0) throw ConfigError("similarity range must lie within [-1, 1]");
}

std::uint32_t bucketize(double s, const BucketConfig& cfg) {
    const double B = double(cfg.buckets);
    double q = std::floor((s - cfg.range.s_min) / (cfg.range.s_max - cfg.range.s_min) * B);
    if (!(q >= 0.0)) q = 0.0;  // also catches NaN
    if (q > B - 1.0) q = B - 1.0;
    return static_cast<std::uint32_t>(q);
}

std::span<const double> bucket_embedding(std::span<const double> table, std::size_t width, std::size_t q) {
    if (width == 0 || (q + 1) * width > table.size()) {
        throw std::logic_error("bucket index " + std::to_string(q) + " outside the bucket table");
    }
    return table.subspan(q * width, width);
}

}  // namespace siren
