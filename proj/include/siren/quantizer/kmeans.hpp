#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace siren {

struct KMeansConfig {
    std::size_t k = 8;
    std::size_t iterations = 25;
    std::uint64_t seed = 0;
};

struct KMeansResult {
    std::size_t k = 0;
    std::size_t dim = 0;
    std::vector<float> centroids;            // k x dim, row-major
    std::vector<std::uint32_t> assignment;   // per point, nearest centroid
    double mse = 0.0;                        // mean squared distance to assigned centroid
};

// Lloyd's algorithm with k-means++ seeding over row-major `points` (n x dim).
// Nearest-centroid ties go to the lowest index. A cluster that empties is
// re-seeded with the point of the largest cluster farthest from its centroid.
// Throws InputError on non-finite data or a dimension mismatch, and
// DegenerateError when fewer than k distinct points exist.
KMeansResult kmeans(std::span<const float> points, std::size_t dim, const KMeansConfig& config);

// Index of the nearest row of `centroids` (k x dim), lowest index on ties.
std::uint32_t nearest_centroid(std::span<const float> centroids, std::size_t dim, std::span<const float> x,
                               double* out_dist = nullptr);

std::size_t count_distinct_rows(std::span<const float> points, std::size_t dim);

}  // namespace siren
