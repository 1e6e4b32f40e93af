#include "siren/quantizer/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <string_view>
#include <unordered_set>

#include "siren/errors.hpp"
#include "siren/simd/kernels.hpp"

namespace siren {

namespace {

std::span<const float> row(std::span<const float> m, std::size_t dim, std::size_t i) {
    return m.subspan(i * dim, dim);
}

}  // namespace

std::size_t count_distinct_rows(std::span<const float> points, std::size_t dim) {
    const std::size_t n = points.size() / dim;
    std::unordered_set<std::string_view> seen;
    seen.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        seen.emplace(reinterpret_cast<const char*>(points.data() + i * dim), dim * sizeof(float));
    }
    return seen.size();
}

std::uint32_t nearest_centroid(std::span<const float> centroids, std::size_t dim, std::span<const float> x,
                               double* out_dist) {
    const std::size_t k = centroids.size() / dim;
    std::uint32_t best = 0;
    double best_d = simd::squared_l2(row(centroids, dim, 0), x);
    for (std::size_t c = 1; c < k; ++c) {
        const double dist = simd::squared_l2(row(centroids, dim, c), x);
        if (dist < best_d) {
            best_d = dist;
            best = static_cast<std::uint32_t>(c);
        }
    }
    if (out_dist) *out_dist = best_d;
    return best;
}

KMeansResult kmeans(std::span<const float> points, std::size_t dim, const KMeansConfig& config) {
    if (dim == 0 || points.size() % dim != 0) throw InputError("kmeans: data size is not a multiple of dim");
    if (config.k == 0) throw InputError("kmeans: k must be at least 1");
    for (float v : points) {
        if (!std::isfinite(v)) throw InputError("kmeans: non-finite input");
    }
    const std::size_t n = points.size() / dim;
    const std::size_t k = config.k;
    const std::size_t distinct = count_distinct_rows(points, dim);
    if (distinct < k) {
        throw DegenerateError("kmeans: " + std::to_string(distinct) + " distinct points for k=" + std::to_string(k));
    }

    std::mt19937_64 rng(config.seed);
    KMeansResult res;
    res.k = k;
    res.dim = dim;
    res.centroids.resize(k * dim);
    res.assignment.assign(n, 0);

    auto set_centroid = [&](std::size_t c, std::size_t point) {
        const auto src = row(points, dim, point);
        std::copy(src.begin(), src.end(), res.centroids.begin() + c * dim);
    };

    // k-means++ seeding.
    std::vector<double> d2(n);
    set_centroid(0, rng() % n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = simd::squared_l2(row(points, dim, i), row(res.centroids, dim, 0));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (double v : d2) total += v;
        std::size_t pick = n - 1;
        const double target = unif(rng) * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += d2[i];
            if (d2[i] > 0.0 && acc >= target) {
                pick = i;
                break;
            }
        }
        while (d2[pick] == 0.0) --pick;  // rounding at the tail; distinct >= k guarantees a hit
        set_centroid(c, pick);
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], simd::squared_l2(row(points, dim, i), row(res.centroids, dim, c)));
        }
    }

    std::vector<double> sums(k * dim);
    std::vector<std::size_t> counts(k);
    std::vector<double> dist(n);
    auto assign = [&] {
        for (std::size_t i = 0; i < n; ++i) {
            res.assignment[i] = nearest_centroid(res.centroids, dim, row(points, dim, i), &dist[i]);
        }
    };

    for (std::size_t it = 0; it < config.iterations; ++it) {
        assign();
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = res.assignment[i];
            ++counts[c];
            const auto p = row(points, dim, i);
            for (std::size_t j = 0; j < dim; ++j) sums[c * dim + j] += p[j];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            for (std::size_t j = 0; j < dim; ++j) {
                res.centroids[c * dim + j] = static_cast<float>(sums[c * dim + j] / double(counts[c]));
            }
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            const auto largest =
                static_cast<std::uint32_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
            std::size_t far = n;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (res.assignment[i] != largest) continue;
                const double dd = simd::squared_l2(row(points, dim, i), row(res.centroids, dim, largest));
                if (dd > far_d) {
                    far_d = dd;
                    far = i;
                }
            }
            set_centroid(c, far);
            res.assignment[far] = static_cast<std::uint32_t>(c);
            --counts[largest];
            counts[c] = 1;
        }
    }

    assign();
    double total = 0.0;
    for (double v : dist) total += v;
    res.mse = total / double(n);
    return res;
}

}  // namespace siren
