#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "siren/quantizer/codebooks.hpp"

namespace siren {

// Packed nested prefix (c1..ck) of a SemId. The depth sits in the top byte so
// (0) and (0, 0) never collide; codes occupy fixed-width fields below it.
struct PrefixToken {
    std::uint32_t depth = 0;
    std::uint64_t key = 0;

    bool operator==(const PrefixToken&) const = default;
};

class PrefixPacker {
public:
    // Throws ConfigError unless 1 <= max_depth and max_depth * bits(C) <= 56.
    PrefixPacker(std::size_t codebook_size, std::size_t max_depth);

    std::uint64_t pack(std::span<const std::uint32_t> prefix) const;
    std::size_t bits_per_code() const { return bits_; }
    std::size_t max_depth() const { return max_depth_; }
    std::size_t codebook_size() const { return size_; }

private:
    std::size_t size_;
    std::size_t max_depth_;
    std::size_t bits_;
};

// Exactly K tokens, token k packing (c1..ck). Throws ConfigError if K is 0 or
// exceeds the SemId length or the packer's depth.
std::vector<PrefixToken> prefix_tokens(const SemId& id, std::size_t K, const PrefixPacker& packer);

// Maps packed keys to rows of the shared prefix embedding table. Rows are
// assigned in ascending key order; every unseen key resolves to the final
// out-of-vocabulary row.
class PrefixVocabulary {
public:
    PrefixVocabulary() = default;
    explicit PrefixVocabulary(std::vector<std::uint64_t> keys);

    static PrefixVocabulary from_semids(const SemIdMap& semids, std::size_t K, const PrefixPacker& packer);

    std::size_t row(std::uint64_t key) const;
    std::size_t oov_row() const { return keys_.size(); }
    std::size_t rows() const { return keys_.size() + 1; }
    const std::vector<std::uint64_t>& keys() const { return keys_; }

private:
    std::vector<std::uint64_t> keys_;
    std::unordered_map<std::uint64_t, std::size_t> lookup_;
};

// Concatenation of the K prefix rows: width K * width. `table` is
// rows() x width, row-major.
std::vector<double> semantic_embedding(const PrefixVocabulary& vocab, std::span<const double> table,
                                       std::size_t width, std::span<const PrefixToken> tokens);

}  // namespace siren
