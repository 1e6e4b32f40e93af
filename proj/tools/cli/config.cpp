#include "config.hpp"

#include "siren/errors.hpp"
#include "siren/util/encoding.hpp"

namespace siren::cli {

Json default_config() {
    const SynthConfig s;
    const ModelConfig m;
    const TrainConfig t;
    const CalibrationConfig c;
    return Json{
        {"seed", 7},
        {"corpus",
         {{"path", ""},
          {"synth",
           {{"n_users", s.n_users},
            {"n_items", s.n_items},
            {"n_clusters", s.n_clusters},
            {"dim", s.dim},
            {"cluster_noise", s.cluster_noise},
            {"min_history", s.min_history},
            {"max_history", s.max_history},
            {"impressions_per_user", s.impressions_per_user},
            {"interests_per_user", s.interests_per_user},
            {"dominant_interest_weight", s.dominant_interest_weight},
            {"off_interest_rate", s.off_interest_rate},
            {"target_interest_rate", s.target_interest_rate},
            {"brand_vocab", s.brand_vocab},
            {"user_segment_vocab", s.user_segment_vocab},
            {"context_vocab", s.context_vocab},
            {"labels",
             {{"bias", s.labels.bias},
              {"w_sim", s.labels.w_sim},
              {"w_affinity", s.labels.w_affinity},
              {"noise_std", s.labels.noise_std}}}}}}},
        {"split", {{"policy", "time"}, {"eval_fraction", 0.2}, {"cut", nullptr}}},
        {"quantizer",
         {{"levels", m.semid_levels},
          {"codebook_size", m.codebook_size},
          {"prefix_depth", m.prefix_depth},
          {"prefix_width", m.prefix_width},
          {"iterations", 25}}},
        {"similarity",
         {{"buckets", m.buckets},
          {"range", "calibrate"},
          {"s_min", -1.0},
          {"s_max", 1.0},
          {"sample_size", c.sample_size},
          {"lo_pct", c.lo_pct},
          {"hi_pct", c.hi_pct}}},
        {"gsu", {{"strategy", "soft"}, {"k", 50}, {"fallback", "recency"}}},
        {"model",
         {{"item_widths", m.item_widths},
          {"user_widths", m.user_widths},
          {"context_widths", m.context_widths},
          {"bucket_width", m.bucket_width},
          {"heads", m.heads},
          {"head_dim", m.head_dim},
          {"hidden", m.hidden},
          {"use_semid", true},
          {"use_simbucket", true},
          {"use_target_interaction", true}}},
        {"training",
         {{"dense_lr", t.optimizer.dense_lr},
          {"sparse_lr", t.optimizer.sparse_lr},
          {"batch_size", t.batch_size},
          {"epochs", t.epochs},
          {"weight_decay", t.optimizer.weight_decay},
          {"beta1", t.optimizer.beta1},
          {"beta2", t.optimizer.beta2},
          {"eps", t.optimizer.eps},
          {"eval_every", t.eval_every}}},
        {"retrieve", {{"limit", 1000}}},
        {"bench", {{"k", 50}, {"max_queries", 2000}}},
        {"analysis",
         {{"impressions", "eval"},
          {"clusters", {8, 32, 128}},
          {"kmeans_iterations", 25},
          {"permutations", 200},
          {"mi_compare", false},
          {"min_support", 50},
          {"bin_width", 0.0},
          {"sweep_buckets", {10, 20, 40, 80}}}},
    };
}

namespace {

bool same_kind(const Json& a, const Json& b) {
    if (a.is_null()) return b.is_null() || b.is_number();  // nullable numbers
    if (a.is_number()) return b.is_number();
    return a.type() == b.type();
}

}  // namespace

Json merge_config(const Json& base, const Json& user, const std::string& path) {
    if (!user.is_object()) throw ConfigError((path.empty() ? "config" : path) + ": expected an object");
    Json out = base;
    for (const auto& [key, value] : user.items()) {
        const std::string p = path.empty() ? key : path + "." + key;
        if (!base.contains(key)) throw ConfigError(p + ": unknown key");
        const auto& def = base[key];
        if (def.is_object()) {
            out[key] = merge_config(def, value, p);
        } else if (!same_kind(def, value)) {
            throw ConfigError(p + ": expected " + std::string(def.is_null() ? "number or null" : def.type_name()) +
                              ", got " + value.type_name());
        } else {
            out[key] = value;
        }
    }
    return out;
}

void apply_override(Json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value: " + assignment);
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    Json value;
    try {
        value = Json::parse(text);
    } catch (const nlohmann::json::exception&) {
        value = text;
    }
    Json patch = value;
    std::size_t end = key.size();
    while (true) {
        const auto dot = key.rfind('.', end - 1);
        const std::string part = key.substr(dot == std::string::npos ? 0 : dot + 1,
                                            end - (dot == std::string::npos ? 0 : dot + 1));
        if (part.empty()) throw ConfigError("override has an empty key segment: " + assignment);
        patch = Json{{part, patch}};
        if (dot == std::string::npos) break;
        end = dot;
    }
    config = merge_config(config, patch);
}

namespace {

template <typename T>
T get(const Json& j, const char* section, const char* key) {
    try {
        return j.at(section).at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string(section) + "." + key + ": " + e.what());
    }
}

std::size_t get_count(const Json& j, const char* section, const char* key) {
    const auto& v = j.at(section).at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw ConfigError(std::string(section) + "." + key + ": expected a non-negative integer");
    }
    return v.get<std::size_t>();
}

std::vector<std::size_t> get_counts(const Json& j, const char* section, const char* key) {
    const auto& v = j.at(section).at(key);
    std::vector<std::size_t> out;
    for (const auto& e : v) {
        if (!e.is_number_integer() || e.get<long long>() < 0) {
            throw ConfigError(std::string(section) + "." + key + ": expected non-negative integers");
        }
        out.push_back(e.get<std::size_t>());
    }
    return out;
}

}  // namespace

ExperimentConfig parse_config(const Json& r) {
    ExperimentConfig c;
    c.resolved = r;
    if (!r.at("seed").is_number_integer() || r.at("seed").get<long long>() < 0) {
        throw ConfigError("seed: expected a non-negative integer");
    }
    c.seed = r.at("seed").get<std::uint64_t>();

    const auto path = get<std::string>(r, "corpus", "path");
    if (!path.empty()) c.corpus_path = path;
    const auto& sj = r.at("corpus").at("synth");
    auto& s = c.synth;
    s.seed = c.seed;
    s.n_users = get_count(r["corpus"], "synth", "n_users");
    s.n_items = get_count(r["corpus"], "synth", "n_items");
    s.n_clusters = get_count(r["corpus"], "synth", "n_clusters");
    s.dim = get_count(r["corpus"], "synth", "dim");
    s.cluster_noise = sj.at("cluster_noise").get<double>();
    s.min_history = get_count(r["corpus"], "synth", "min_history");
    s.max_history = get_count(r["corpus"], "synth", "max_history");
    s.impressions_per_user = get_count(r["corpus"], "synth", "impressions_per_user");
    s.interests_per_user = get_count(r["corpus"], "synth", "interests_per_user");
    s.dominant_interest_weight = sj.at("dominant_interest_weight").get<double>();
    s.off_interest_rate = sj.at("off_interest_rate").get<double>();
    s.target_interest_rate = sj.at("target_interest_rate").get<double>();
    s.brand_vocab = static_cast<std::uint32_t>(get_count(r["corpus"], "synth", "brand_vocab"));
    s.user_segment_vocab = static_cast<std::uint32_t>(get_count(r["corpus"], "synth", "user_segment_vocab"));
    s.context_vocab = static_cast<std::uint32_t>(get_count(r["corpus"], "synth", "context_vocab"));
    const auto& lj = sj.at("labels");
    s.labels = {lj.at("bias").get<double>(), lj.at("w_sim").get<double>(), lj.at("w_affinity").get<double>(),
                lj.at("noise_std").get<double>()};
    if (!c.corpus_path) {
        try {
            s.validate();
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("corpus.") + e.what());
        }
    }

    const auto policy = get<std::string>(r, "split", "policy");
    if (policy == "time") {
        c.split.policy = SplitPolicy::TimeHoldout;
    } else if (policy == "user") {
        c.split.policy = SplitPolicy::UserHoldout;
    } else {
        throw ConfigError("split.policy: expected \"time\" or \"user\", got \"" + policy + "\"");
    }
    c.split.eval_fraction = get<double>(r, "split", "eval_fraction");
    if (!(c.split.eval_fraction > 0.0 && c.split.eval_fraction < 1.0)) {
        throw ConfigError("split.eval_fraction must lie in (0, 1)");
    }
    if (!r["split"]["cut"].is_null()) c.split.cut = get<Timestamp>(r, "split", "cut");
    c.split.seed = c.seed;

    c.quantizer.levels = get_count(r, "quantizer", "levels");
    c.quantizer.codebook_size = get_count(r, "quantizer", "codebook_size");
    c.quantizer.iterations = get_count(r, "quantizer", "iterations");
    c.quantizer.seed = c.seed;
    c.prefix_depth = get_count(r, "quantizer", "prefix_depth");
    c.prefix_width = get_count(r, "quantizer", "prefix_width");
    if (c.quantizer.levels == 0) throw ConfigError("quantizer.levels must be at least 1");
    if (c.quantizer.codebook_size == 0) throw ConfigError("quantizer.codebook_size must be at least 1");
    if (c.quantizer.iterations == 0) throw ConfigError("quantizer.iterations must be at least 1");

    const auto range = get<std::string>(r, "similarity", "range");
    if (range != "calibrate" && range != "fixed") {
        throw ConfigError("similarity.range: expected \"calibrate\" or \"fixed\", got \"" + range + "\"");
    }
    c.calibrate_range = range == "calibrate";
    c.fixed_range = SimRange{get<double>(r, "similarity", "s_min"), get<double>(r, "similarity", "s_max"), 0, false};
    c.calibration.sample_size = get_count(r, "similarity", "sample_size");
    c.calibration.lo_pct = get<double>(r, "similarity", "lo_pct");
    c.calibration.hi_pct = get<double>(r, "similarity", "hi_pct");
    c.calibration.seed = c.seed;
    if (c.calibration.sample_size < 2) throw ConfigError("similarity.sample_size must be at least 2");
    if (!(c.calibration.lo_pct >= 0.0 && c.calibration.lo_pct < c.calibration.hi_pct && c.calibration.hi_pct <= 100.0)) {
        throw ConfigError("similarity.lo_pct/hi_pct must satisfy 0 <= lo_pct < hi_pct <= 100");
    }

    const auto strategy = get<std::string>(r, "gsu", "strategy");
    if (strategy == "soft") {
        c.gsu.strategy = GsuStrategy::Soft;
    } else if (strategy == "hard") {
        c.gsu.strategy = GsuStrategy::Hard;
    } else {
        throw ConfigError("gsu.strategy: expected \"soft\" or \"hard\", got \"" + strategy + "\"");
    }
    c.gsu.k = get_count(r, "gsu", "k");
    if (c.gsu.k == 0) throw ConfigError("gsu.k must be at least 1");
    const auto fallback = get<std::string>(r, "gsu", "fallback");
    if (fallback == "none") {
        c.gsu.fallback = FallbackPolicy::None;
    } else if (fallback == "recency") {
        c.gsu.fallback = FallbackPolicy::Recency;
    } else {
        throw ConfigError("gsu.fallback: expected \"none\" or \"recency\", got \"" + fallback + "\"");
    }

    auto& m = c.model;
    m.item_widths = get_counts(r, "model", "item_widths");
    m.user_widths = get_counts(r, "model", "user_widths");
    m.context_widths = get_counts(r, "model", "context_widths");
    m.bucket_width = get_count(r, "model", "bucket_width");
    m.heads = get_count(r, "model", "heads");
    m.head_dim = get_count(r, "model", "head_dim");
    m.hidden = get_counts(r, "model", "hidden");
    m.ablation.use_semid = get<bool>(r, "model", "use_semid");
    m.ablation.use_simbucket = get<bool>(r, "model", "use_simbucket");
    m.ablation.use_target_interaction = get<bool>(r, "model", "use_target_interaction");
    m.semid_levels = c.quantizer.levels;
    m.codebook_size = c.quantizer.codebook_size;
    m.prefix_depth = c.prefix_depth;
    m.prefix_width = c.prefix_width;
    m.buckets = get_count(r, "similarity", "buckets");
    m.seed = c.seed;

    // Width algebra against the slot layout the corpus will have: known for
    // synthetic corpora, one slot per listed width otherwise.
    ModelConfig probe = m;
    if (c.corpus_path) {
        probe.item_vocab.assign(std::max<std::size_t>(1, m.item_widths.size()), 1);
        probe.user_vocab.assign(std::max<std::size_t>(1, m.user_widths.size()), 1);
        probe.context_vocab.assign(std::max<std::size_t>(1, m.context_widths.size()), 1);
    } else {
        probe.item_vocab = {static_cast<std::uint32_t>(s.n_items), s.brand_vocab};
        probe.user_vocab = {static_cast<std::uint32_t>(s.n_users), s.user_segment_vocab};
        probe.context_vocab = {s.context_vocab};
    }
    probe.range = c.calibrate_range ? SimRange{} : c.fixed_range;
    probe.validate();
    // Prefix tokens are built whenever SemIds exist, even for models without them.
    if (c.prefix_depth == 0 || c.prefix_depth > c.quantizer.levels) {
        throw ConfigError("quantizer.prefix_depth must lie in [1, quantizer.levels]");
    }
    (void)PrefixPacker(c.quantizer.codebook_size, c.prefix_depth);

    auto& t = c.training;
    t.optimizer.dense_lr = get<double>(r, "training", "dense_lr");
    t.optimizer.sparse_lr = get<double>(r, "training", "sparse_lr");
    t.optimizer.weight_decay = get<double>(r, "training", "weight_decay");
    t.optimizer.beta1 = get<double>(r, "training", "beta1");
    t.optimizer.beta2 = get<double>(r, "training", "beta2");
    t.optimizer.eps = get<double>(r, "training", "eps");
    t.batch_size = get_count(r, "training", "batch_size");
    t.epochs = get_count(r, "training", "epochs");
    t.eval_every = get_count(r, "training", "eval_every");
    t.seed = c.seed;
    t.validate();

    c.retrieve_limit = get_count(r, "retrieve", "limit");
    c.bench.k = get_count(r, "bench", "k");
    c.bench.max_queries = get_count(r, "bench", "max_queries");
    c.bench.fallback = c.gsu.fallback;
    if (c.bench.k == 0) throw ConfigError("bench.k must be at least 1");

    const auto which = get<std::string>(r, "analysis", "impressions");
    if (which != "eval" && which != "all") {
        throw ConfigError("analysis.impressions: expected \"eval\" or \"all\", got \"" + which + "\"");
    }
    c.analyze_all_impressions = which == "all";
    c.mi.clusters = get_counts(r, "analysis", "clusters");
    c.mi.iterations = get_count(r, "analysis", "kmeans_iterations");
    c.mi.permutations = get_count(r, "analysis", "permutations");
    c.mi.seed = c.seed;
    for (auto k : c.mi.clusters) {
        if (k == 0) throw ConfigError("analysis.clusters entries must be at least 1");
    }
    if (c.mi.permutations == 0) throw ConfigError("analysis.permutations must be at least 1");
    c.mi_compare = get<bool>(r, "analysis", "mi_compare");
    c.dispersion.min_support = get_count(r, "analysis", "min_support");
    c.dispersion.bin_width = get<double>(r, "analysis", "bin_width");
    if (c.dispersion.min_support == 0) throw ConfigError("analysis.min_support must be at least 1");
    if (c.dispersion.bin_width < 0.0) throw ConfigError("analysis.bin_width must be non-negative");
    c.sweep_buckets = get_counts(r, "analysis", "sweep_buckets");
    for (auto b : c.sweep_buckets) {
        if (b == 0) throw ConfigError("analysis.sweep_buckets entries must be at least 1");
    }
    return c;
}

ExperimentConfig load_config(const std::optional<std::filesystem::path>& file, std::span<const std::string> overrides) {
    Json config = default_config();
    if (file) {
        Json user;
        try {
            user = Json::parse(util::read_file(*file));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(file->string() + ": " + e.what());
        } catch (const DataError& e) {
            throw ConfigError(e.what());
        }
        config = merge_config(config, user);
    }
    for (const auto& o : overrides) apply_override(config, o);
    return parse_config(config);
}

std::string ExperimentConfig::hash() const { return util::sha256_hex(resolved.dump()); }

ModelConfig bind_model(const ExperimentConfig& config, const CorpusMeta& meta, const SimRange& range) {
    ModelConfig m = config.model;
    m.item_vocab = meta.item_vocab;
    m.user_vocab = meta.user_vocab;
    m.context_vocab = meta.context_vocab;
    m.range = range;
    m.validate();
    return m;
}

}  // namespace siren::cli
