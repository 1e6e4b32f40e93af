#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "siren/core/types.hpp"
#include "siren/quantizer/codebooks.hpp"
#include "siren/quantizer/prefix.hpp"
#include "siren/similarity/similarity.hpp"

namespace siren {

struct Ablation {
    bool use_semid = true;
    bool use_simbucket = true;
    bool use_target_interaction = true;

    bool operator==(const Ablation&) const = default;
};

struct ModelConfig {
    // Vocabulary sizes per categorical slot (from the corpus meta).
    std::vector<std::uint32_t> item_vocab;
    std::vector<std::uint32_t> user_vocab;
    std::vector<std::uint32_t> context_vocab;
    // Embedding width per slot; a single entry is broadcast to every slot.
    std::vector<std::size_t> item_widths{8};
    std::vector<std::size_t> user_widths{8};
    std::vector<std::size_t> context_widths{4};

    Ablation ablation;

    std::size_t semid_levels = 3;     // M
    std::size_t codebook_size = 256;  // C
    std::size_t prefix_depth = 3;     // K
    std::size_t prefix_width = 8;     // w

    std::size_t buckets = 40;  // B
    std::size_t bucket_width = 8;
    SimRange range;

    std::size_t heads = 2;
    std::size_t head_dim = 16;
    std::vector<std::size_t> hidden{256, 64};

    std::uint64_t seed = 0;

    // Width algebra. Derived sizes honor the ablation switches: without
    // SemIds the semantic segment is empty, without buckets the attention
    // side inputs are.
    std::size_t item_width(std::size_t slot) const;
    std::size_t user_width(std::size_t slot) const;
    std::size_t context_width(std::size_t slot) const;
    std::size_t id_width() const;
    std::size_t semantic_width() const;
    std::size_t unified_width() const;  // D
    std::size_t side_width() const;
    std::size_t attention_input_width() const;  // D + side
    std::size_t user_feature_width() const;
    std::size_t context_feature_width() const;
    std::size_t mlp_input_width() const;  // 2D + user + context

    void validate() const;  // throws ConfigError naming the offending field

    bool operator==(const ModelConfig&) const = default;
};

struct Tensor {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    bool sparse = false;  // embedding table: only touched rows change
    std::vector<double> data;

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool operator==(const Tensor&) const = default;
};

// Positions of each named tensor in ModelParams::tensors; npos when a tensor
// is disabled by the ablation switches.
struct TensorLayout {
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::vector<std::size_t> item_emb, user_emb, context_emb;
    std::size_t prefix = npos;
    std::size_t bucket = npos;
    std::size_t target_sim = npos;
    std::vector<std::size_t> query, key;  // per head, head_dim x attention input
    std::vector<std::size_t> mlp_w, mlp_b;  // per layer, last layer has one output
};

struct ModelParams {
    ModelConfig config;
    PrefixVocabulary prefix_vocab;
    std::vector<Tensor> tensors;
    TensorLayout layout;

    Tensor& at(std::size_t i) { return tensors[i]; }
    const Tensor& at(std::size_t i) const { return tensors[i]; }
    const Tensor* find(const std::string& name) const;

    bool operator==(const ModelParams& o) const {
        return config == o.config && prefix_vocab.keys() == o.prefix_vocab.keys() && tensors == o.tensors;
    }
};

// Default config with the corpus's feature-slot vocabularies filled in.
ModelConfig model_config_for(const CorpusMeta& meta);

// Allocates every tensor for `config` and initializes it from config.seed:
// embedding rows uniform in [-0.01, 0.01], projections and MLP weights uniform
// in +-1/sqrt(fan_in), biases zero. Every embedding table carries a trailing
// out-of-vocabulary row.
ModelParams init_params(const ModelConfig& config, PrefixVocabulary prefix_vocab);

TensorLayout make_layout(const std::vector<Tensor>& tensors, const ModelConfig& config);

// Row indices each item contributes to its unified representation: one row
// per item feature slot, then K prefix rows (when SemIds are enabled).
// Out-of-range feature values map to the slot's OOV row and are counted.
class FeatureIndex {
public:
    FeatureIndex(const Corpus& corpus, const ModelParams& params, const SemIdMap* semids);

    std::span<const std::uint32_t> item_rows(std::size_t item) const {
        return {rows_.data() + item * stride_, stride_};
    }
    std::size_t stride() const { return stride_; }
    std::size_t oov_hits() const { return oov_hits_; }

private:
    std::size_t stride_ = 0;
    std::vector<std::uint32_t> rows_;
    std::size_t oov_hits_ = 0;
};

// Rows for a single item outside a corpus (used by unify()).
std::vector<std::uint32_t> item_feature_rows(const ModelParams& params, const ItemRecord& item, const SemId* semid,
                                             std::size_t* oov_hits = nullptr);

std::string model_config_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& text);

// Checkpoint: "SIRENCK1", u64 header length, JSON header {config_hash,
// config, seed, prefix_keys, tensors:[{name, rows, cols, sparse}]}, then each
// tensor as little-endian float64 in header order. Round trips bit-exactly.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);
std::string config_hash(const ModelConfig& config);

}  // namespace siren
