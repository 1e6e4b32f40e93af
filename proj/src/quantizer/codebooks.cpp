#include "siren/quantizer/codebooks.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "siren/errors.hpp"
#include "siren/quantizer/kmeans.hpp"
#include "siren/simd/kernels.hpp"
#include "siren/util/encoding.hpp"

namespace siren {

Codebooks train_codebooks(std::span<const float> embeddings, std::size_t dim, const QuantizerConfig& config) {
    if (config.levels == 0) throw ConfigError("quantizer.levels must be at least 1");
    if (config.codebook_size == 0) throw ConfigError("quantizer.codebook_size must be at least 1");
    if (dim == 0 || embeddings.size() % dim != 0) throw InputError("embedding matrix is not a multiple of dim");

    Codebooks cb;
    cb.levels = config.levels;
    cb.size = config.codebook_size;
    cb.dim = dim;
    cb.centroids.reserve(cb.levels * cb.size * dim);

    const std::size_t n = embeddings.size() / dim;
    std::vector<float> residual(embeddings.begin(), embeddings.end());
    for (std::size_t m = 0; m < config.levels; ++m) {
        KMeansConfig kc{config.codebook_size, config.iterations, config.seed + 0x9E3779B97F4A7C15ull * (m + 1)};
        KMeansResult km;
        try {
            km = kmeans(residual, dim, kc);
        } catch (const DegenerateError& e) {
            // Deeper levels can collapse once the residual is exactly zero.
            if (m == 0) throw;
            throw DegenerateError("quantizer level " + std::to_string(m + 1) + ": " + e.what());
        }
        cb.centroids.insert(cb.centroids.end(), km.centroids.begin(), km.centroids.end());
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const float* c = km.centroids.data() + km.assignment[i] * dim;
            float* r = residual.data() + i * dim;
            for (std::size_t j = 0; j < dim; ++j) r[j] -= c[j];
            total += simd::squared_norm(std::span<const float>(r, dim));
        }
        cb.level_mse.push_back(total / double(n));
    }
    return cb;
}

SemId encode(const Codebooks& cb, std::span<const float> embedding) {
    if (embedding.size() != cb.dim) {
        throw InputError("encode: embedding dimension " + std::to_string(embedding.size()) + ", codebooks expect " +
                         std::to_string(cb.dim));
    }
    for (float v : embedding) {
        if (!std::isfinite(v)) throw InputError("encode: non-finite embedding entry");
    }
    SemId id;
    id.codes.reserve(cb.levels);
    std::vector<float> residual(embedding.begin(), embedding.end());
    for (std::size_t m = 0; m < cb.levels; ++m) {
        const auto code = nearest_centroid(cb.level(m), cb.dim, residual);
        id.codes.push_back(code);
        const auto c = cb.centroid(m, code);
        for (std::size_t j = 0; j < cb.dim; ++j) residual[j] -= c[j];
    }
    return id;
}

std::vector<float> reconstruct(const Codebooks& cb, const SemId& id) {
    if (id.codes.size() != cb.levels) throw InputError("reconstruct: SemId length does not match codebook levels");
    std::vector<float> out(cb.dim, 0.0f);
    for (std::size_t m = 0; m < cb.levels; ++m) {
        if (id.codes[m] >= cb.size) throw InputError("reconstruct: code out of range");
        const auto c = cb.centroid(m, id.codes[m]);
        for (std::size_t j = 0; j < cb.dim; ++j) out[j] += c[j];
    }
    return out;
}

void save_codebooks(const Codebooks& cb, const std::filesystem::path& path) {
    std::string out = "SIRENCB1";
    util::append_u32(out, static_cast<std::uint32_t>(cb.levels));
    util::append_u32(out, static_cast<std::uint32_t>(cb.size));
    util::append_u32(out, static_cast<std::uint32_t>(cb.dim));
    for (float v : cb.centroids) util::append_f32(out, v);
    for (double v : cb.level_mse) util::append_f64(out, v);
    util::write_file(path, out);
}

Codebooks load_codebooks(const std::filesystem::path& path) {
    const std::string bytes = util::read_file(path);
    util::ByteReader r(bytes, path.string());
    if (r.take(8) != "SIRENCB1") throw DataError(path.string() + ": not a codebook file");
    Codebooks cb;
    cb.levels = r.u32();
    cb.size = r.u32();
    cb.dim = r.u32();
    cb.centroids.resize(cb.levels * cb.size * cb.dim);
    for (auto& v : cb.centroids) v = r.f32();
    cb.level_mse.resize(cb.levels);
    for (auto& v : cb.level_mse) v = r.f64();
    if (!r.done()) throw DataError(path.string() + ": trailing bytes");
    return cb;
}

SemIdMap encode_corpus(const Codebooks& cb, const Corpus& corpus) {
    SemIdMap map;
    map.reserve(corpus.items.size());
    for (std::size_t i = 0; i < corpus.items.size(); ++i) {
        map.emplace(corpus.items[i].item_id, encode(cb, corpus.embedding(i)));
    }
    return map;
}

void save_semid_map(const SemIdMap& map, std::span<const ItemId> order, const std::filesystem::path& path) {
    std::string out;
    for (ItemId id : order) {
        const auto it = map.find(id);
        if (it == map.end()) throw InputError("save_semid_map: no SemId for item " + std::to_string(id));
        out += std::to_string(id);
        for (auto c : it->second.codes) {
            out += ' ';
            out += std::to_string(c);
        }
        out += '\n';
    }
    util::write_file(path, out);
}

SemIdMap load_semid_map(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    SemIdMap map;
    std::string line;
    std::size_t lineno = 0;
    std::size_t levels = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        ItemId id;
        if (!(ss >> id)) throw ParseError(path.filename().string(), lineno, "expected item id");
        SemId sid;
        std::uint32_t c;
        while (ss >> c) sid.codes.push_back(c);
        if (!ss.eof()) throw ParseError(path.filename().string(), lineno, "malformed code");
        if (sid.codes.empty()) throw ParseError(path.filename().string(), lineno, "no codes");
        if (levels == 0) levels = sid.codes.size();
        if (sid.codes.size() != levels) throw ParseError(path.filename().string(), lineno, "inconsistent code count");
        if (!map.emplace(id, std::move(sid)).second) {
            throw ParseError(path.filename().string(), lineno, "duplicate item id");
        }
    }
    return map;
}

}  // namespace siren
