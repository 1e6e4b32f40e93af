#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <unordered_map>
#include <vector>

#include "siren/core/types.hpp"

namespace siren {

struct SemId {
    std::vector<std::uint32_t> codes;  // c1..cM, coarse to fine

    bool operator==(const SemId&) const = default;
};

// Residual quantizer: level m holds C centroids fit on what levels 1..m-1 left
// unexplained. Stands in for an RQ-VAE; consumers only see the code tuples.
struct Codebooks {
    std::size_t levels = 0;  // M
    std::size_t size = 0;    // C
    std::size_t dim = 0;     // d
    std::vector<float> centroids;        // M x C x d
    std::vector<double> level_mse;       // mean squared residual after each level

    std::span<const float> level(std::size_t m) const {
        return {centroids.data() + m * size * dim, size * dim};
    }
    std::span<const float> centroid(std::size_t m, std::size_t c) const {
        return {centroids.data() + (m * size + c) * dim, dim};
    }

    bool operator==(const Codebooks&) const = default;
};

struct QuantizerConfig {
    std::size_t levels = 3;
    std::size_t codebook_size = 256;
    std::size_t iterations = 25;
    std::uint64_t seed = 0;
};

// `embeddings` is row-major n x dim. Throws DegenerateError when fewer than C
// distinct embeddings exist and InputError on non-finite input.
Codebooks train_codebooks(std::span<const float> embeddings, std::size_t dim, const QuantizerConfig& config);

// Greedy residual assignment, lowest index on ties. Throws InputError on a
// dimension mismatch or non-finite input.
SemId encode(const Codebooks& codebooks, std::span<const float> embedding);

std::vector<float> reconstruct(const Codebooks& codebooks, const SemId& id);

// Binary codebook file: "SIRENCB1", u32 M, u32 C, u32 d, M*C*d float32,
// M float64 level errors; all little-endian.
void save_codebooks(const Codebooks& codebooks, const std::filesystem::path& path);
Codebooks load_codebooks(const std::filesystem::path& path);

using SemIdMap = std::unordered_map<ItemId, SemId>;

SemIdMap encode_corpus(const Codebooks& codebooks, const Corpus& corpus);

// Text mapping, one item per line: "<item_id> <c1> ... <cM>", in corpus item
// order when written by the tools.
void save_semid_map(const SemIdMap& map, std::span<const ItemId> order, const std::filesystem::path& path);
SemIdMap load_semid_map(const std::filesystem::path& path);

}  // namespace siren
