#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>

#include "siren/analysis/information.hpp"
#include "siren/core/corpus_io.hpp"
#include "siren/errors.hpp"
#include "siren/esu/model.hpp"
#include "siren/training/backward.hpp"
#include "siren/training/metrics.hpp"
#include "siren/util/encoding.hpp"

namespace siren::cli {

namespace fs = std::filesystem;

namespace {

// Tracks one command's inputs and outputs and writes its manifest.
class Run {
public:
    Run(const ExperimentConfig& config, fs::path dir, std::string command)
        : config_(config), dir_(std::move(dir)), command_(std::move(command)) {}

    const fs::path& dir() const { return dir_; }

    // Path of an upstream artifact; throws DependencyError naming `producer`.
    fs::path require(const std::string& rel, const std::string& producer) {
        const auto path = dir_ / rel;
        if (!fs::exists(path)) {
            throw DependencyError("missing " + rel + " in the run directory; run `siren " + producer + "` first");
        }
        if (fs::is_directory(path)) {
            for (const auto& f : files_under(path)) inputs_.emplace_back(rel + "/" + f, util::sha256_file(path / f));
        } else {
            inputs_.emplace_back(rel, util::sha256_file(path));
        }
        return path;
    }

    void write(const std::string& rel, std::string_view bytes) {
        util::write_file(dir_ / rel, bytes);
        outputs_.emplace_back(rel, util::sha256_hex(bytes));
    }

    // Records a file or directory already written by a library routine.
    void produced(const std::string& rel) {
        const auto path = dir_ / rel;
        if (fs::is_directory(path)) {
            for (const auto& f : files_under(path)) outputs_.emplace_back(rel + "/" + f, util::sha256_file(path / f));
        } else {
            outputs_.emplace_back(rel, util::sha256_file(path));
        }
    }

    void external_input(const std::string& name, const fs::path& path) {
        for (const auto& f : files_under(path)) inputs_.emplace_back(name + "/" + f, util::sha256_file(path / f));
    }

    void finish() const {
        Json inputs = Json::object();
        for (const auto& [k, v] : inputs_) inputs[k] = v;
        Json outputs = Json::object();
        for (const auto& [k, v] : outputs_) outputs[k] = v;
        const Json manifest{
            {"command", command_},
            {"versions", {{"siren", kVersion}}},
            {"seed", config_.seed},
            {"config_hash", config_.hash()},
            {"config", config_.resolved},
            {"inputs", inputs},
            {"outputs", outputs},
        };
        std::string name = command_;
        std::replace(name.begin(), name.end(), ' ', '_');
        util::write_file(dir_ / "manifests" / (name + ".json"), manifest.dump(2) + "\n");
    }

private:
    static std::vector<std::string> files_under(const fs::path& root) {
        std::vector<std::string> out;
        for (const auto& e : fs::recursive_directory_iterator(root)) {
            if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root).generic_string());
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    const ExperimentConfig& config_;
    fs::path dir_;
    std::string command_;
    std::vector<std::pair<std::string, std::string>> inputs_, outputs_;
};

bool needs_semids(const ExperimentConfig& c) {
    return c.model.ablation.use_semid || c.gsu.strategy == GsuStrategy::Hard;
}

Corpus require_corpus(Run& run) { return load_corpus(run.require("corpus", "synth")); }

SemIdMap require_semids(Run& run) { return load_semid_map(run.require("semids.txt", "quantize")); }

std::optional<SemIdMap> semids_if_needed(Run& run, const ExperimentConfig& c) {
    if (!needs_semids(c)) return std::nullopt;
    return require_semids(run);
}

SimRange require_range(Run& run) {
    const auto text = util::read_file(run.require("range.json", "retrieve"));
    try {
        const auto j = Json::parse(text);
        return SimRange{j.at("s_min").get<double>(), j.at("s_max").get<double>(),
                        j.at("sample_size").get<std::size_t>(), j.at("widened").get<bool>()};
    } catch (const nlohmann::json::exception& e) {
        throw DataError("range.json: " + std::string(e.what()));
    }
}

PrefixVocabulary prefix_vocab(const ExperimentConfig& c, const std::optional<SemIdMap>& semids) {
    if (!semids || !c.model.ablation.use_semid) return {};
    return PrefixVocabulary::from_semids(*semids, c.prefix_depth, PrefixPacker(c.quantizer.codebook_size, c.prefix_depth));
}

// The checkpoint must have been trained with the model the current config
// describes, otherwise downstream reports would silently mix settings.
ModelParams require_model(Run& run, const ExperimentConfig& c, const Corpus& corpus, const SimRange& range) {
    auto params = load_checkpoint(run.require("model.ckpt", "train"));
    const auto expected = bind_model(c, corpus.meta, range);
    if (config_hash(params.config) != config_hash(expected)) {
        throw ConfigError("model.ckpt was trained with a different model config; rerun `siren train`");
    }
    return params;
}

std::vector<std::size_t> analysis_impressions(const ExperimentConfig& c, const Corpus& corpus) {
    if (!c.analyze_all_impressions) return split(corpus, c.split).eval;
    std::vector<std::size_t> all(corpus.impressions.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
}

const char* tag_name(RetrievalTag t) {
    switch (t) {
        case RetrievalTag::Soft: return "soft";
        case RetrievalTag::Hard: return "hard";
        case RetrievalTag::Fallback: return "fallback";
    }
    return "?";
}

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

void cmd_synth(const ExperimentConfig& c, const fs::path& run_dir) {
    Run run(c, run_dir, "synth");
    Corpus corpus;
    if (c.corpus_path) {
        corpus = load_corpus(*c.corpus_path);
        run.external_input("corpus.path", *c.corpus_path);
    } else {
        corpus = generate_synthetic(c.synth);
    }
    save_corpus(corpus, run_dir / "corpus");
    run.produced("corpus");
    run.finish();
    std::printf("corpus: %zu items, %zu users, %zu impressions\n", corpus.items.size(), corpus.sequences.size(),
                corpus.impressions.size());
}

void cmd_quantize(const ExperimentConfig& c, const fs::path& run_dir) {
    Run run(c, run_dir, "quantize");
    const auto corpus = require_corpus(run);
    const auto codebooks = train_codebooks(corpus.embedding_matrix(), corpus.meta.dim, c.quantizer);
    const auto semids = encode_corpus(codebooks, corpus);
    std::vector<ItemId> order;
    order.reserve(corpus.items.size());
    for (const auto& item : corpus.items) order.push_back(item.item_id);
    save_codebooks(codebooks, run_dir / "codebooks.bin");
    save_semid_map(semids, order, run_dir / "semids.txt");
    run.produced("codebooks.bin");
    run.produced("semids.txt");
    run.finish();
    for (std::size_t m = 0; m < codebooks.levels; ++m) {
        std::printf("level %zu: mse %.6f\n", m + 1, codebooks.level_mse[m]);
    }
}

void cmd_index(const ExperimentConfig& c, const fs::path& run_dir) {
    Run run(c, run_dir, "index build");
    const auto corpus = require_corpus(run);
    const auto semids = require_semids(run);
    std::string out;
    std::size_t bytes = 0;
    for (std::size_t s = 0; s < corpus.sequences.size(); ++s) {
        const auto index = build_index(corpus, s, semids, c.quantizer.codebook_size);
        bytes += index.memory_bytes();
        Json postings = Json::array();
        for (std::uint32_t code = 0; code < index.codes(); ++code) {
            const auto p = index.postings(code);
            if (!p.empty()) postings.push_back(Json::array({code, std::vector<std::uint32_t>(p.begin(), p.end())}));
        }
        out += Json{{"user_id", corpus.sequences[s].user_id}, {"events", index.size()}, {"postings", postings}}.dump();
        out += '\n';
    }
    run.write("index.jsonl", out);
    run.finish();
    std::printf("indexed %zu users, %zu bytes of posting lists\n", corpus.sequences.size(), bytes);
}

void cmd_retrieve(const ExperimentConfig& c, const fs::path& run_dir) {
    Run run(c, run_dir, "retrieve");
    const auto corpus = require_corpus(run);
    std::optional<SemIdMap> semids;
    if (c.gsu.strategy == GsuStrategy::Hard) {
        semids = require_semids(run);
        run.require("index.jsonl", "index build");
    }
    const auto sp = split(corpus, c.split);
    const SimRange range = c.calibrate_range ? calibrate_range(corpus, c.calibration, sp.train) : c.fixed_range;
    const BucketConfig buckets{c.model.buckets, range};
    buckets.validate();

    const Gsu gsu(corpus, c.gsu, semids ? &*semids : nullptr, c.quantizer.codebook_size);
    const std::size_t n = std::min(c.retrieve_limit, corpus.impressions.size());
    std::string out;
    std::size_t fallbacks = 0;
    for (std::size_t i = 0; i < n; ++i) {
        auto seq = gsu.retrieve(i);
        assign_buckets(seq, buckets);
        if (seq.tag == RetrievalTag::Fallback) ++fallbacks;
        Json events = Json::array();
        for (const auto& e : seq.events) events.push_back(Json::array({e.item_id, e.timestamp, e.similarity, e.bucket}));
        const auto& imp = corpus.impressions[i];
        out += Json{{"impression", i},
                    {"user_id", imp.user_id},
                    {"target_item_id", imp.target_item_id},
                    {"tag", tag_name(seq.tag)},
                    {"events", events}}
                   .dump();
        out += '\n';
    }
    run.write("retrieved.jsonl", out);
    run.write("range.json", Json{{"s_min", range.s_min},
                                 {"s_max", range.s_max},
                                 {"sample_size", range.sample_size},
                                 {"widened", range.widened}}
                                    .dump(2) +
                                "\n");
    run.finish();
    std::printf("similarity range [%.6f, %.6f]; retrieved %zu impressions, %zu fallbacks\n", range.s_min, range.s_max,
                n, fallbacks);
}

void cmd_train(const ExperimentConfig& c, const fs::path& run_dir) {
    Run run(c, run_dir, "train");
    const auto corpus = require_corpus(run);
    const auto semids = semids_if_needed(run, c);
    const auto range = require_range(run);
    const auto model = bind_model(c, corpus.meta, range);
    const SemIdMap* sem = semids ? &*semids : nullptr;

    const PreparedData data(corpus, c.gsu, sem, c.quantizer.codebook_size);
    const auto sp = split(corpus, c.split);
    const auto result = train(data, sp, init_params(model, prefix_vocab(c, semids)), sem, c.training);
    save_checkpoint(result.params, run_dir / "model.ckpt");
    run.produced("model.ckpt");
    run.write("metrics.jsonl", metrics_jsonl(result.history));
    run.finish();
    std::printf("trained %zu steps on %zu impressions; eval GAUC %.6f\n", result.history.size(), sp.train.size(),
                result.eval_gauc);
}

void cmd_eval(const ExperimentConfig& c, const fs::path& run_dir) {
    Run run(c, run_dir, "eval");
    const auto corpus = require_corpus(run);
    const auto semids = semids_if_needed(run, c);
    const auto range = require_range(run);
    const auto params = require_model(run, c, corpus, range);
    const SemIdMap* sem = semids ? &*semids : nullptr;

    const PreparedData data(corpus, c.gsu, sem, c.quantizer.codebook_size);
    const auto sp = split(corpus, c.split);
    const FeatureIndex features(corpus, params, sem);
    const auto scores = predict_impressions(params, features, data, sp.eval);
    std::vector<UserId> users;
    std::vector<std::uint8_t> labels;
    double loss = 0.0;
    for (std::size_t k = 0; k < sp.eval.size(); ++k) {
        const auto& imp = corpus.impressions[sp.eval[k]];
        users.push_back(imp.user_id);
        labels.push_back(imp.label);
        loss += bce_loss(scores[k], imp.label);
    }
    loss /= double(sp.eval.size());
    const double g = gauc(users, scores, labels);
    const double a = auc(scores, labels);
    const Json report{{"impressions", sp.eval.size()},
                      {"gauc", g},
                      {"auc", finite_or_null(a)},
                      {"logloss", loss},
                      {"retrieval_fallbacks", data.fallback_count()},
                      {"empty_retrievals", data.empty_count()},
                      {"oov_hits", features.oov_hits()}};
    run.write("eval.json", report.dump(2) + "\n");
    run.finish();
    std::printf("eval GAUC %.6f, AUC %.6f, logloss %.6f over %zu impressions\n", g, a, loss, sp.eval.size());
}

void cmd_bench(const ExperimentConfig& c, const fs::path& run_dir) {
    Run run(c, run_dir, "bench");
    const auto corpus = require_corpus(run);
    const auto semids = require_semids(run);
    const auto reports = bench_retrieval(corpus, semids, c.quantizer.codebook_size, c.bench);
    run.write("bench.jsonl", cost_report_jsonl(reports));
    run.finish();
    for (const auto& r : reports) {
        std::printf("%s: p50 %.0f ns, p99 %.0f ns, %.0f bytes/query, index %llu bytes\n", r.strategy.c_str(), r.p50_ns,
                    r.p99_ns, r.bytes_touched, static_cast<unsigned long long>(r.index_bytes));
    }
}

void cmd_analyze_gain(const ExperimentConfig& c, const fs::path& run_dir) {
    Run run(c, run_dir, "analyze gain");
    const auto corpus = require_corpus(run);
    const auto semids = require_semids(run);
    const auto range = require_range(run);
    const PreparedData data(corpus, c.gsu, &semids, c.quantizer.codebook_size);
    const auto impressions = analysis_impressions(c, corpus);
    const auto labels = impression_labels(corpus, impressions);
    const auto sem = make_joint(semid_groups(data, semids, impressions), labels, c.quantizer.codebook_size);
    const auto bucket = make_joint(bucket_groups(max_retrieved_similarity(data, impressions),
                                                 BucketConfig{c.model.buckets, range}),
                                   labels, c.model.buckets + 1);
    auto summary = [](const DiscreteJoint& j) {
        return Json{{"groups", j.groups},
                    {"conditional_entropy", conditional_entropy(j)},
                    {"information_gain", information_gain(j)},
                    {"mutual_information", mutual_information(j)}};
    };
    const double g_sem = information_gain(sem);
    const double g_bucket = information_gain(bucket);
    const Json report{{"impressions", impressions.size()},
                      {"label_entropy", label_entropy(sem)},
                      {"semid_level1", summary(sem)},
                      {"sim_bucket", summary(bucket)},
                      {"semid_minus_bucket", g_sem - g_bucket}};
    run.write("analysis/gain.json", report.dump(2) + "\n");
    run.finish();
    std::printf("information gain (nats): SemID level 1 %.6f, similarity bucket %.6f\n", g_sem, g_bucket);
}

void cmd_analyze_dispersion(const ExperimentConfig& c, const fs::path& run_dir) {
    Run run(c, run_dir, "analyze dispersion");
    const auto corpus = require_corpus(run);
    const auto semids = require_semids(run);
    const auto range = require_range(run);
    const PreparedData data(corpus, c.gsu, &semids, c.quantizer.codebook_size);
    const auto impressions = analysis_impressions(c, corpus);
    const auto report = within_bucket_dispersion(max_retrieved_similarity(data, impressions),
                                                 semid_groups(data, semids, impressions),
                                                 impression_labels(corpus, impressions),
                                                 BucketConfig{c.model.buckets, range}, c.dispersion);
    run.write("analysis/dispersion.txt", dispersion_table(report));
    run.write("analysis/dispersion.jsonl", dispersion_jsonl(report));
    run.finish();
    if (!report.diagnostic.empty()) std::printf("%s\n", report.diagnostic.c_str());
    std::printf("mean within-bucket CTR std %.6f vs binomial noise %.6f; chi2 %.3f on %.0f df, p %.3g\n",
                report.mean_std, report.mean_noise_std, report.chi2, report.df, report.p_value);
}

void cmd_analyze_mi(const ExperimentConfig& c, const fs::path& run_dir) {
    Run run(c, run_dir, "analyze mi");
    const auto corpus = require_corpus(run);
    const auto semids = semids_if_needed(run, c);
    const auto range = require_range(run);
    const auto params = require_model(run, c, corpus, range);
    const SemIdMap* sem = semids ? &*semids : nullptr;
    const PreparedData data(corpus, c.gsu, sem, c.quantizer.codebook_size);
    const auto impressions = analysis_impressions(c, corpus);

    const auto points = mi_vs_clusters(params, FeatureIndex(corpus, params, sem), data, impressions, c.mi);
    run.write("analysis/mi.jsonl", mi_jsonl(points));
    if (c.mi_compare) {
        const auto untrained = init_params(params.config, params.prefix_vocab);
        const auto base = mi_vs_clusters(untrained, FeatureIndex(corpus, untrained, sem), data, impressions, c.mi);
        run.write("analysis/mi_untrained.jsonl", mi_jsonl(base));
    }
    run.finish();
    for (const auto& p : points) {
        std::printf("k=%zu: MI %.6f nats, null p99 %.6f, p %.4f\n", p.k, p.mi, p.null_p99, p.p_value);
    }
}

void cmd_analyze_sweep(const ExperimentConfig& c, const fs::path& run_dir) {
    Run run(c, run_dir, "analyze sweep");
    const auto corpus = require_corpus(run);
    const auto semids = semids_if_needed(run, c);
    const auto range = require_range(run);
    const SemIdMap* sem = semids ? &*semids : nullptr;
    const PreparedData data(corpus, c.gsu, sem, c.quantizer.codebook_size);
    const auto sp = split(corpus, c.split);
    const auto points = bucket_sweep(data, sp, sem, bind_model(c, corpus.meta, range), prefix_vocab(c, semids),
                                     c.training, c.sweep_buckets);
    run.write("analysis/sweep.jsonl", sweep_jsonl(points));
    run.finish();
    for (const auto& p : points) std::printf("B=%zu: eval GAUC %.6f\n", p.buckets, p.gauc);
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const NumericError*>(&e)) return 3;
    if (dynamic_cast<const DataError*>(&e)) return 2;
    return 1;
}

}  // namespace siren::cli
