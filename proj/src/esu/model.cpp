#include "siren/esu/model.hpp"

#include <cmath>
#include <json.hpp>
#include <random>

#include "siren/errors.hpp"
#include "siren/util/encoding.hpp"

namespace siren {

using ojson = nlohmann::ordered_json;

namespace {

std::size_t slot_width(const std::vector<std::size_t>& widths, std::size_t slot) {
    return widths.size() == 1 ? widths[0] : widths.at(slot);
}

std::size_t total_width(const std::vector<std::uint32_t>& vocab, const std::vector<std::size_t>& widths) {
    std::size_t w = 0;
    for (std::size_t s = 0; s < vocab.size(); ++s) w += slot_width(widths, s);
    return w;
}

void check_slots(const char* field, const std::vector<std::uint32_t>& vocab, const std::vector<std::size_t>& widths) {
    const std::string f(field);
    for (std::size_t s = 0; s < vocab.size(); ++s) {
        if (vocab[s] == 0) throw ConfigError("model." + f + "_vocab[" + std::to_string(s) + "] must be positive");
    }
    if (widths.size() != 1 && widths.size() != vocab.size()) {
        throw ConfigError("model." + f + "_widths must have one entry or one per slot (" +
                          std::to_string(vocab.size()) + ")");
    }
    for (auto w : widths) {
        if (w == 0) throw ConfigError("model." + f + "_widths entries must be positive");
    }
}

}  // namespace

std::size_t ModelConfig::item_width(std::size_t s) const { return slot_width(item_widths, s); }
std::size_t ModelConfig::user_width(std::size_t s) const { return slot_width(user_widths, s); }
std::size_t ModelConfig::context_width(std::size_t s) const { return slot_width(context_widths, s); }
std::size_t ModelConfig::id_width() const { return total_width(item_vocab, item_widths); }
std::size_t ModelConfig::semantic_width() const { return ablation.use_semid ? prefix_depth * prefix_width : 0; }
std::size_t ModelConfig::unified_width() const { return id_width() + semantic_width(); }
std::size_t ModelConfig::side_width() const { return ablation.use_simbucket ? bucket_width : 0; }
std::size_t ModelConfig::attention_input_width() const { return unified_width() + side_width(); }
std::size_t ModelConfig::user_feature_width() const { return total_width(user_vocab, user_widths); }
std::size_t ModelConfig::context_feature_width() const { return total_width(context_vocab, context_widths); }
std::size_t ModelConfig::mlp_input_width() const {
    return 2 * unified_width() + user_feature_width() + context_feature_width();
}

void ModelConfig::validate() const {
    check_slots("item", item_vocab, item_widths);
    check_slots("user", user_vocab, user_widths);
    check_slots("context", context_vocab, context_widths);
    if (ablation.use_semid) {
        if (semid_levels == 0) throw ConfigError("quantizer.levels must be at least 1");
        if (prefix_depth == 0 || prefix_depth > semid_levels) {
            throw ConfigError("quantizer.prefix_depth must lie in [1, quantizer.levels]");
        }
        if (prefix_width == 0) throw ConfigError("quantizer.prefix_width must be positive");
        PrefixPacker(codebook_size, prefix_depth);  // throws on overflow
    }
    if (buckets == 0) throw ConfigError("similarity.buckets must be at least 1");
    if (ablation.use_simbucket) {
        if (bucket_width == 0) throw ConfigError("model.bucket_width must be positive");
        BucketConfig{buckets, range}.validate();
    }
    if (heads == 0) throw ConfigError("model.heads must be at least 1");
    if (head_dim == 0) throw ConfigError("model.head_dim must be positive");
    for (auto h : hidden) {
        if (h == 0) throw ConfigError("model.hidden entries must be positive");
    }
    if (unified_width() == 0) throw ConfigError("unified item width is zero: no item feature slots and SemIds disabled");
}

ModelConfig model_config_for(const CorpusMeta& meta) {
    ModelConfig c;
    c.item_vocab = meta.item_vocab;
    c.user_vocab = meta.user_vocab;
    c.context_vocab = meta.context_vocab;
    return c;
}

const Tensor* ModelParams::find(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

TensorLayout make_layout(const std::vector<Tensor>& tensors, const ModelConfig& config) {
    TensorLayout L;
    auto index_of = [&](const std::string& name) {
        for (std::size_t i = 0; i < tensors.size(); ++i) {
            if (tensors[i].name == name) return i;
        }
        return TensorLayout::npos;
    };
    auto require = [&](const std::string& name) {
        const auto i = index_of(name);
        if (i == TensorLayout::npos) throw DataError("model is missing tensor " + name);
        return i;
    };
    for (std::size_t s = 0; s < config.item_vocab.size(); ++s) L.item_emb.push_back(require("item_emb/" + std::to_string(s)));
    for (std::size_t s = 0; s < config.user_vocab.size(); ++s) L.user_emb.push_back(require("user_emb/" + std::to_string(s)));
    for (std::size_t s = 0; s < config.context_vocab.size(); ++s) {
        L.context_emb.push_back(require("context_emb/" + std::to_string(s)));
    }
    if (config.ablation.use_semid) L.prefix = require("prefix_emb");
    if (config.ablation.use_simbucket) {
        L.bucket = require("bucket_emb");
        L.target_sim = require("target_sim");
    }
    for (std::size_t h = 0; h < config.heads; ++h) {
        L.query.push_back(require("attn/query/" + std::to_string(h)));
        L.key.push_back(require("attn/key/" + std::to_string(h)));
    }
    for (std::size_t l = 0; l <= config.hidden.size(); ++l) {
        L.mlp_w.push_back(require("mlp/w" + std::to_string(l)));
        L.mlp_b.push_back(require("mlp/b" + std::to_string(l)));
    }
    return L;
}

ModelParams init_params(const ModelConfig& config, PrefixVocabulary prefix_vocab) {
    config.validate();
    ModelParams p;
    p.config = config;
    p.prefix_vocab = std::move(prefix_vocab);

    std::mt19937_64 rng(config.seed);
    auto add = [&](std::string name, std::size_t rows, std::size_t cols, bool sparse, double bound) {
        Tensor t{std::move(name), rows, cols, sparse, std::vector<double>(rows * cols, 0.0)};
        if (bound > 0.0) {
            std::uniform_real_distribution<double> u(-bound, bound);
            for (auto& v : t.data) v = u(rng);
        }
        p.tensors.push_back(std::move(t));
    };
    constexpr double emb = 0.01;

    for (std::size_t s = 0; s < config.item_vocab.size(); ++s) {
        add("item_emb/" + std::to_string(s), config.item_vocab[s] + 1, config.item_width(s), true, emb);
    }
    for (std::size_t s = 0; s < config.user_vocab.size(); ++s) {
        add("user_emb/" + std::to_string(s), config.user_vocab[s] + 1, config.user_width(s), true, emb);
    }
    for (std::size_t s = 0; s < config.context_vocab.size(); ++s) {
        add("context_emb/" + std::to_string(s), config.context_vocab[s] + 1, config.context_width(s), true, emb);
    }
    if (config.ablation.use_semid) add("prefix_emb", p.prefix_vocab.rows(), config.prefix_width, true, emb);
    if (config.ablation.use_simbucket) {
        add("bucket_emb", config.buckets, config.bucket_width, true, emb);
        add("target_sim", 1, config.bucket_width, false, emb);
    }
    const std::size_t A = config.attention_input_width();
    for (std::size_t h = 0; h < config.heads; ++h) {
        add("attn/query/" + std::to_string(h), config.head_dim, A, false, 1.0 / std::sqrt(double(A)));
        add("attn/key/" + std::to_string(h), config.head_dim, A, false, 1.0 / std::sqrt(double(A)));
    }
    std::size_t fan_in = config.mlp_input_width();
    for (std::size_t l = 0; l <= config.hidden.size(); ++l) {
        const std::size_t out = l < config.hidden.size() ? config.hidden[l] : 1;
        add("mlp/w" + std::to_string(l), out, fan_in, false, 1.0 / std::sqrt(double(fan_in)));
        add("mlp/b" + std::to_string(l), 1, out, false, 0.0);
        fan_in = out;
    }
    p.layout = make_layout(p.tensors, config);
    return p;
}

std::vector<std::uint32_t> item_feature_rows(const ModelParams& params, const ItemRecord& item, const SemId* semid,
                                             std::size_t* oov_hits) {
    const auto& cfg = params.config;
    std::vector<std::uint32_t> rows;
    if (item.id_features.size() != cfg.item_vocab.size()) {
        throw InputError("item " + std::to_string(item.item_id) + " has " + std::to_string(item.id_features.size()) +
                         " feature slots, model expects " + std::to_string(cfg.item_vocab.size()));
    }
    for (std::size_t s = 0; s < cfg.item_vocab.size(); ++s) {
        const auto v = item.id_features[s];
        if (v >= cfg.item_vocab[s]) {
            if (oov_hits) ++*oov_hits;
            rows.push_back(cfg.item_vocab[s]);
        } else {
            rows.push_back(v);
        }
    }
    if (cfg.ablation.use_semid) {
        if (semid && semid->codes.size() >= cfg.prefix_depth) {
            const PrefixPacker packer(cfg.codebook_size, cfg.prefix_depth);
            for (const auto& t : prefix_tokens(*semid, cfg.prefix_depth, packer)) {
                rows.push_back(static_cast<std::uint32_t>(params.prefix_vocab.row(t.key)));
            }
        } else {
            if (oov_hits) ++*oov_hits;
            for (std::size_t k = 0; k < cfg.prefix_depth; ++k) {
                rows.push_back(static_cast<std::uint32_t>(params.prefix_vocab.oov_row()));
            }
        }
    }
    return rows;
}

FeatureIndex::FeatureIndex(const Corpus& corpus, const ModelParams& params, const SemIdMap* semids) {
    const auto& cfg = params.config;
    stride_ = cfg.item_vocab.size() + (cfg.ablation.use_semid ? cfg.prefix_depth : 0);
    rows_.reserve(stride_ * corpus.items.size());
    for (const auto& item : corpus.items) {
        const SemId* sid = nullptr;
        if (semids) {
            const auto it = semids->find(item.item_id);
            if (it != semids->end()) sid = &it->second;
        }
        const auto r = item_feature_rows(params, item, sid, &oov_hits_);
        rows_.insert(rows_.end(), r.begin(), r.end());
    }
}

namespace {

ojson config_to_json(const ModelConfig& c) {
    return ojson{
        {"item_vocab", c.item_vocab},
        {"user_vocab", c.user_vocab},
        {"context_vocab", c.context_vocab},
        {"item_widths", c.item_widths},
        {"user_widths", c.user_widths},
        {"context_widths", c.context_widths},
        {"use_semid", c.ablation.use_semid},
        {"use_simbucket", c.ablation.use_simbucket},
        {"use_target_interaction", c.ablation.use_target_interaction},
        {"semid_levels", c.semid_levels},
        {"codebook_size", c.codebook_size},
        {"prefix_depth", c.prefix_depth},
        {"prefix_width", c.prefix_width},
        {"buckets", c.buckets},
        {"bucket_width", c.bucket_width},
        {"s_min", c.range.s_min},
        {"s_max", c.range.s_max},
        {"range_sample_size", c.range.sample_size},
        {"range_widened", c.range.widened},
        {"heads", c.heads},
        {"head_dim", c.head_dim},
        {"hidden", c.hidden},
        {"seed", c.seed},
    };
}

ModelConfig config_from_json(const ojson& j) {
    ModelConfig c;
    c.item_vocab = j.at("item_vocab").get<std::vector<std::uint32_t>>();
    c.user_vocab = j.at("user_vocab").get<std::vector<std::uint32_t>>();
    c.context_vocab = j.at("context_vocab").get<std::vector<std::uint32_t>>();
    c.item_widths = j.at("item_widths").get<std::vector<std::size_t>>();
    c.user_widths = j.at("user_widths").get<std::vector<std::size_t>>();
    c.context_widths = j.at("context_widths").get<std::vector<std::size_t>>();
    c.ablation.use_semid = j.at("use_semid").get<bool>();
    c.ablation.use_simbucket = j.at("use_simbucket").get<bool>();
    c.ablation.use_target_interaction = j.at("use_target_interaction").get<bool>();
    c.semid_levels = j.at("semid_levels").get<std::size_t>();
    c.codebook_size = j.at("codebook_size").get<std::size_t>();
    c.prefix_depth = j.at("prefix_depth").get<std::size_t>();
    c.prefix_width = j.at("prefix_width").get<std::size_t>();
    c.buckets = j.at("buckets").get<std::size_t>();
    c.bucket_width = j.at("bucket_width").get<std::size_t>();
    c.range.s_min = j.at("s_min").get<double>();
    c.range.s_max = j.at("s_max").get<double>();
    c.range.sample_size = j.at("range_sample_size").get<std::size_t>();
    c.range.widened = j.at("range_widened").get<bool>();
    c.heads = j.at("heads").get<std::size_t>();
    c.head_dim = j.at("head_dim").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

}  // namespace

std::string model_config_json(const ModelConfig& config) { return config_to_json(config).dump(); }

ModelConfig model_config_from_json(const std::string& text) { return config_from_json(ojson::parse(text)); }

std::string config_hash(const ModelConfig& config) { return util::sha256_hex(model_config_json(config)); }

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
    ojson tensors = ojson::array();
    for (const auto& t : params.tensors) {
        tensors.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}, {"sparse", t.sparse}});
    }
    const ojson header = {
        {"config_hash", config_hash(params.config)},
        {"config", config_to_json(params.config)},
        {"seed", params.config.seed},
        {"prefix_keys", params.prefix_vocab.keys()},
        {"tensors", std::move(tensors)},
    };
    const std::string h = header.dump();
    std::string out = "SIRENCK1";
    util::append_u64(out, h.size());
    out += h;
    for (const auto& t : params.tensors) {
        for (double v : t.data) util::append_f64(out, v);
    }
    util::write_file(path, out);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    const std::string bytes = util::read_file(path);
    util::ByteReader r(bytes, path.string());
    if (r.take(8) != "SIRENCK1") throw DataError(path.string() + ": not a checkpoint");
    const auto hlen = r.u64();
    ojson header;
    try {
        header = ojson::parse(r.take(hlen));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": bad checkpoint header: " + e.what());
    }
    ModelParams p;
    try {
        p.config = config_from_json(header.at("config"));
        if (header.at("config_hash").get<std::string>() != config_hash(p.config)) {
            throw DataError(path.string() + ": config hash mismatch");
        }
        p.prefix_vocab = PrefixVocabulary(header.at("prefix_keys").get<std::vector<std::uint64_t>>());
        for (const auto& tj : header.at("tensors")) {
            Tensor t;
            t.name = tj.at("name").get<std::string>();
            t.rows = tj.at("rows").get<std::size_t>();
            t.cols = tj.at("cols").get<std::size_t>();
            t.sparse = tj.at("sparse").get<bool>();
            p.tensors.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": bad checkpoint header: " + e.what());
    }
    for (auto& t : p.tensors) {
        t.data.resize(t.rows * t.cols);
        for (auto& v : t.data) v = r.f64();
    }
    if (!r.done()) throw DataError(path.string() + ": trailing bytes");
    p.layout = make_layout(p.tensors, p.config);
    return p;
}

}  // namespace siren
