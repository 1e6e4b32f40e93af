#include "siren/quantizer/prefix.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "siren/errors.hpp"

namespace siren {

PrefixPacker::PrefixPacker(std::size_t codebook_size, std::size_t max_depth)
    : size_(codebook_size), max_depth_(max_depth) {
    if (codebook_size == 0) throw ConfigError("prefix packing needs a non-empty codebook");
    if (max_depth == 0) throw ConfigError("prefix depth K must be at least 1");
    bits_ = std::max<std::size_t>(1, std::bit_width(codebook_size - 1));
    if (bits_ * max_depth > 56) {
        throw ConfigError("prefix depth " + std::to_string(max_depth) + " with codebook size " +
                          std::to_string(codebook_size) + " does not fit a 56-bit key");
    }
}

std::uint64_t PrefixPacker::pack(std::span<const std::uint32_t> prefix) const {
    if (prefix.empty() || prefix.size() > max_depth_) throw InputError("prefix length outside [1, K]");
    std::uint64_t key = std::uint64_t(prefix.size()) << 56;
    for (std::size_t j = 0; j < prefix.size(); ++j) {
        if (prefix[j] >= size_) throw InputError("code " + std::to_string(prefix[j]) + " outside codebook");
        key |= std::uint64_t(prefix[j]) << (bits_ * j);
    }
    return key;
}

std::vector<PrefixToken> prefix_tokens(const SemId& id, std::size_t K, const PrefixPacker& packer) {
    if (K == 0) throw ConfigError("prefix depth K must be at least 1");
    if (K > id.codes.size()) {
        throw ConfigError("prefix depth K=" + std::to_string(K) + " exceeds SemId length M=" +
                          std::to_string(id.codes.size()));
    }
    if (K > packer.max_depth()) throw ConfigError("prefix depth K exceeds the packer's configured depth");
    std::vector<PrefixToken> out;
    out.reserve(K);
    for (std::size_t k = 1; k <= K; ++k) {
        out.push_back({static_cast<std::uint32_t>(k), packer.pack(std::span(id.codes).first(k))});
    }
    return out;
}

PrefixVocabulary::PrefixVocabulary(std::vector<std::uint64_t> keys) : keys_(std::move(keys)) {
    std::sort(keys_.begin(), keys_.end());
    keys_.erase(std::unique(keys_.begin(), keys_.end()), keys_.end());
    lookup_.reserve(keys_.size());
    for (std::size_t i = 0; i < keys_.size(); ++i) lookup_.emplace(keys_[i], i);
}

PrefixVocabulary PrefixVocabulary::from_semids(const SemIdMap& semids, std::size_t K, const PrefixPacker& packer) {
    std::vector<std::uint64_t> keys;
    keys.reserve(semids.size() * K);
    for (const auto& [item, sid] : semids) {
        for (const auto& t : prefix_tokens(sid, K, packer)) keys.push_back(t.key);
    }
    return PrefixVocabulary(std::move(keys));
}

std::size_t PrefixVocabulary::row(std::uint64_t key) const {
    const auto it = lookup_.find(key);
    return it == lookup_.end() ? oov_row() : it->second;
}

std::vector<double> semantic_embedding(const PrefixVocabulary& vocab, std::span<const double> table,
                                       std::size_t width, std::span<const PrefixToken> tokens) {
    if (table.size() != vocab.rows() * width) throw InputError("prefix table shape does not match vocabulary");
    std::vector<double> out;
    out.reserve(tokens.size() * width);
    for (const auto& t : tokens) {
        const auto r = table.subspan(vocab.row(t.key) * width, width);
        out.insert(out.end(), r.begin(), r.end());
    }
    return out;
}

}  // namespace siren
