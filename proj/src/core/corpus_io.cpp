#include "siren/core/corpus_io.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "siren/errors.hpp"
#include "siren/util/encoding.hpp"

namespace siren {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kMeta = "meta.json";
constexpr const char* kItems = "items.jsonl";
constexpr const char* kSequences = "sequences.jsonl";
constexpr const char* kImpressions = "impressions.jsonl";

template <typename Fn>
void for_each_line(const fs::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(path.filename().string(), lineno, e.what());
        }
        try {
            fn(j);
        } catch (const json::exception& e) {
            throw ParseError(path.filename().string(), lineno, e.what());
        } catch (const ParseError&) {
            throw;
        } catch (const DataError& e) {
            throw ParseError(path.filename().string(), lineno, e.what());
        }
    }
}

}  // namespace

void save_corpus(const Corpus& corpus, const fs::path& dir) {
    fs::create_directories(dir);

    json meta = {
        {"d", corpus.meta.dim},
        {"item_vocab", corpus.meta.item_vocab},
        {"user_vocab", corpus.meta.user_vocab},
        {"context_vocab", corpus.meta.context_vocab},
        {"seed", corpus.meta.seed},
        {"counts",
         {{"items", corpus.items.size()},
          {"sequences", corpus.sequences.size()},
          {"impressions", corpus.impressions.size()}}},
    };
    util::write_file(dir / kMeta, meta.dump(2) + "\n");

    std::string out;
    for (const auto& item : corpus.items) {
        json j = {{"item_id", item.item_id},
                  {"id_features", item.id_features},
                  {"embedding", util::encode_f32_base64(item.embedding)}};
        out += j.dump();
        out += '\n';
    }
    util::write_file(dir / kItems, out);

    out.clear();
    for (const auto& seq : corpus.sequences) {
        json events = json::array();
        for (const auto& e : seq.events) events.push_back({e.item_id, e.timestamp});
        out += json{{"user_id", seq.user_id}, {"events", std::move(events)}}.dump();
        out += '\n';
    }
    util::write_file(dir / kSequences, out);

    out.clear();
    for (const auto& imp : corpus.impressions) {
        json j = {{"user_id", imp.user_id},         {"target_item_id", imp.target_item_id},
                  {"context", imp.context_features}, {"user_features", imp.user_features},
                  {"label", imp.label},              {"event_time", imp.event_time}};
        out += j.dump();
        out += '\n';
    }
    util::write_file(dir / kImpressions, out);
}

Corpus load_corpus(const fs::path& dir) {
    Corpus corpus;
    json meta;
    try {
        meta = json::parse(util::read_file(dir / kMeta));
        corpus.meta.dim = meta.at("d").get<std::size_t>();
        corpus.meta.item_vocab = meta.at("item_vocab").get<std::vector<std::uint32_t>>();
        corpus.meta.user_vocab = meta.at("user_vocab").get<std::vector<std::uint32_t>>();
        corpus.meta.context_vocab = meta.at("context_vocab").get<std::vector<std::uint32_t>>();
        corpus.meta.seed = meta.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ParseError(kMeta, 1, e.what());
    }

    for_each_line(dir / kItems, [&](const json& j) {
        ItemRecord item;
        item.item_id = j.at("item_id").get<ItemId>();
        item.id_features = j.at("id_features").get<std::vector<FeatureValue>>();
        item.embedding = util::decode_f32_base64(j.at("embedding").get<std::string>());
        corpus.items.push_back(std::move(item));
    });

    for_each_line(dir / kSequences, [&](const json& j) {
        BehaviorSequence seq;
        seq.user_id = j.at("user_id").get<UserId>();
        for (const auto& e : j.at("events")) {
            seq.events.push_back({e.at(0).get<ItemId>(), e.at(1).get<Timestamp>()});
        }
        corpus.sequences.push_back(std::move(seq));
    });

    const auto imp_path = dir / kImpressions;
    if (fs::exists(imp_path)) {
        for_each_line(imp_path, [&](const json& j) {
            Impression imp;
            imp.user_id = j.at("user_id").get<UserId>();
            imp.target_item_id = j.at("target_item_id").get<ItemId>();
            imp.context_features = j.at("context").get<std::vector<FeatureValue>>();
            imp.user_features = j.at("user_features").get<std::vector<FeatureValue>>();
            const int label = j.at("label").get<int>();
            if (label != 0 && label != 1) throw json::other_error::create(501, "label must be 0 or 1", nullptr);
            imp.label = static_cast<std::uint8_t>(label);
            imp.event_time = j.at("event_time").get<Timestamp>();
            corpus.impressions.push_back(std::move(imp));
        });
    }

    if (const auto counts = meta.find("counts"); counts != meta.end()) {
        auto check = [&](const char* key, std::size_t actual) {
            const auto declared = counts->at(key).get<std::size_t>();
            if (declared != actual) {
                throw SchemaError(std::string("meta declares ") + std::to_string(declared) + " " + key + ", found " +
                                  std::to_string(actual));
            }
        };
        check("items", corpus.items.size());
        check("sequences", corpus.sequences.size());
        check("impressions", corpus.impressions.size());
    }

    corpus.finalize();
    return corpus;
}

}  // namespace siren
