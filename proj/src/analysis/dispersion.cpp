#include "siren/analysis/dispersion.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <map>
#include <set>

#include "siren/errors.hpp"

namespace siren {

std::vector<double> max_retrieved_similarity(const PreparedData& data, std::span<const std::size_t> impressions) {
    std::vector<double> out;
    out.reserve(impressions.size());
    for (auto i : impressions) {
        const auto ex = data.example(i);
        double m = std::nan("");
        for (double s : ex.similarities) {
            if (std::isnan(m) || s > m) m = s;
        }
        out.push_back(m);
    }
    return out;
}

std::vector<std::uint32_t> bucket_groups(std::span<const double> similarity, const BucketConfig& config) {
    std::vector<std::uint32_t> out;
    out.reserve(similarity.size());
    for (double s : similarity) {
        out.push_back(std::isnan(s) ? static_cast<std::uint32_t>(config.buckets) : bucketize(s, config));
    }
    return out;
}

std::vector<std::uint32_t> semid_groups(const PreparedData& data, const SemIdMap& semids,
                                        std::span<const std::size_t> impressions) {
    std::vector<std::uint32_t> out;
    out.reserve(impressions.size());
    for (auto i : impressions) {
        const auto id = data.corpus().impressions[i].target_item_id;
        const auto it = semids.find(id);
        if (it == semids.end() || it->second.codes.empty()) {
            throw DependencyError("no SemId for item " + std::to_string(id) + "; run `quantize` first");
        }
        out.push_back(it->second.codes[0]);
    }
    return out;
}

std::vector<std::uint8_t> impression_labels(const Corpus& corpus, std::span<const std::size_t> impressions) {
    std::vector<std::uint8_t> out;
    out.reserve(impressions.size());
    for (auto i : impressions) out.push_back(corpus.impressions[i].label);
    return out;
}

DispersionReport within_bucket_dispersion(std::span<const double> similarity, std::span<const std::uint32_t> groups,
                                          std::span<const std::uint8_t> labels, const BucketConfig& buckets,
                                          const DispersionConfig& config) {
    if (similarity.size() != groups.size() || groups.size() != labels.size()) {
        throw InputError("dispersion inputs differ in length");
    }
    buckets.validate();
    if (config.min_support == 0) throw ConfigError("analysis.min_support must be at least 1");
    if (config.bin_width < 0.0) throw ConfigError("analysis.bin_width must be non-negative");

    const bool fixed = config.bin_width > 0.0;
    const std::size_t n_bins = fixed ? static_cast<std::size_t>(std::ceil(2.0 / config.bin_width - 1e-9))
                                     : buckets.buckets;
    auto bin_of = [&](double s) -> std::uint32_t {
        if (!fixed) return bucketize(s, buckets);
        const auto b = static_cast<long long>(std::floor((s + 1.0) / config.bin_width));
        return static_cast<std::uint32_t>(std::clamp<long long>(b, 0, static_cast<long long>(n_bins) - 1));
    };
    auto bounds = [&](std::uint32_t b) {
        if (fixed) return std::pair{-1.0 + b * config.bin_width, std::min(1.0, -1.0 + (b + 1) * config.bin_width)};
        const double w = (buckets.range.s_max - buckets.range.s_min) / double(buckets.buckets);
        return std::pair{buckets.range.s_min + b * w, buckets.range.s_min + (b + 1) * w};
    };

    std::map<std::pair<std::uint32_t, std::uint32_t>, std::pair<std::size_t, std::size_t>> tally;
    for (std::size_t i = 0; i < similarity.size(); ++i) {
        if (std::isnan(similarity[i])) continue;
        auto& t = tally[{bin_of(similarity[i]), groups[i]}];
        ++t.first;
        t.second += labels[i];
    }

    DispersionReport rep;
    namespace bm = boost::math;
    auto it = tally.begin();
    while (it != tally.end()) {
        const std::uint32_t b = it->first.first;
        BucketDispersion bd;
        bd.bucket = b;
        std::tie(bd.lo, bd.hi) = bounds(b);
        std::vector<DispersionCell> cells;
        std::size_t clicks = 0;
        for (; it != tally.end() && it->first.first == b; ++it) {
            const auto [n, c] = it->second;
            if (n < config.min_support) {
                ++bd.excluded;
                continue;
            }
            cells.push_back({b, it->first.second, n, c, double(c) / double(n)});
            bd.n += n;
            clicks += c;
        }
        rep.excluded_cells += bd.excluded;
        bd.groups = cells.size();
        if (cells.empty()) continue;
        bd.pooled_ctr = double(clicks) / double(bd.n);
        bd.ctr_min = 1.0;
        bd.ctr_max = 0.0;
        double mean = 0.0;
        for (const auto& c : cells) {
            bd.ctr_min = std::min(bd.ctr_min, c.ctr);
            bd.ctr_max = std::max(bd.ctr_max, c.ctr);
            mean += c.ctr;
        }
        const double G = double(cells.size());
        mean /= G;
        double var = 0.0, noise = 0.0;
        const double p = bd.pooled_ctr;
        for (const auto& c : cells) {
            var += (c.ctr - mean) * (c.ctr - mean);
            noise += p * (1.0 - p) / double(c.n);
            if (p > 0.0 && p < 1.0) bd.chi2 += (double(c.clicks) - double(c.n) * p) * (double(c.clicks) - double(c.n) * p) /
                                               (double(c.n) * p * (1.0 - p));
        }
        bd.ctr_std = std::sqrt(var / G);
        bd.noise_std = std::sqrt(noise * (G - 1.0) / (G * G));
        if (cells.size() >= 2 && p > 0.0 && p < 1.0) {
            bd.df = G - 1.0;
            bd.p_value = bm::cdf(bm::complement(bm::chi_squared(bd.df), bd.chi2));
            rep.chi2 += bd.chi2;
            rep.df += bd.df;
            rep.mean_std += bd.ctr_std;
            rep.mean_noise_std += bd.noise_std;
        }
        rep.cells.insert(rep.cells.end(), cells.begin(), cells.end());
        rep.buckets.push_back(bd);
    }
    std::size_t tested = 0;
    for (const auto& bd : rep.buckets) tested += bd.df > 0.0;
    if (tested > 0) {
        rep.mean_std /= double(tested);
        rep.mean_noise_std /= double(tested);
        rep.p_value = bm::cdf(bm::complement(bm::chi_squared(rep.df), rep.chi2));
    }
    if (rep.buckets.empty()) {
        rep.diagnostic = "no (bucket, group) cell reaches min_support=" + std::to_string(config.min_support);
    }
    return rep;
}

std::string dispersion_table(const DispersionReport& rep) {
    if (rep.buckets.empty()) return rep.diagnostic + "\n";
    std::set<std::uint32_t> groups;
    for (const auto& c : rep.cells) groups.insert(c.group);
    std::map<std::pair<std::uint32_t, std::uint32_t>, double> ctr;
    for (const auto& c : rep.cells) ctr[{c.bucket, c.group}] = c.ctr;

    std::string out = "bucket        ";
    char buf[64];
    for (auto g : groups) {
        std::snprintf(buf, sizeof buf, " g%-5u", g);
        out += buf;
    }
    out += "   min    max    std  noise\n";
    for (const auto& bd : rep.buckets) {
        std::snprintf(buf, sizeof buf, "[%+.3f,%+.3f)", bd.lo, bd.hi);
        out += buf;
        for (auto g : groups) {
            const auto it = ctr.find({bd.bucket, g});
            if (it == ctr.end()) {
                out += "      .";
            } else {
                std::snprintf(buf, sizeof buf, " %6.3f", it->second);
                out += buf;
            }
        }
        std::snprintf(buf, sizeof buf, " %6.3f %6.3f %6.3f %6.3f\n", bd.ctr_min, bd.ctr_max, bd.ctr_std, bd.noise_std);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "chi2=%.3f df=%.0f p=%.4g excluded_cells=%zu\n", rep.chi2, rep.df, rep.p_value,
                  rep.excluded_cells);
    out += buf;
    return out;
}

std::string dispersion_jsonl(const DispersionReport& rep) {
    using ojson = nlohmann::ordered_json;
    std::string out;
    for (const auto& c : rep.cells) {
        out += ojson{{"type", "cell"}, {"bucket", c.bucket}, {"group", c.group}, {"n", c.n}, {"clicks", c.clicks},
                     {"ctr", c.ctr}}
                   .dump();
        out += '\n';
    }
    for (const auto& b : rep.buckets) {
        out += ojson{{"type", "bucket"},   {"bucket", b.bucket},       {"lo", b.lo},           {"hi", b.hi},
                     {"groups", b.groups}, {"excluded", b.excluded},   {"n", b.n},             {"pooled_ctr", b.pooled_ctr},
                     {"ctr_min", b.ctr_min}, {"ctr_max", b.ctr_max},   {"ctr_std", b.ctr_std}, {"noise_std", b.noise_std},
                     {"chi2", b.chi2},     {"df", b.df},               {"p_value", b.p_value}}
                   .dump();
        out += '\n';
    }
    out += ojson{{"type", "summary"},       {"chi2", rep.chi2},         {"df", rep.df},
                 {"p_value", rep.p_value},  {"mean_std", rep.mean_std}, {"mean_noise_std", rep.mean_noise_std},
                 {"excluded_cells", rep.excluded_cells}, {"diagnostic", rep.diagnostic}}
               .dump();
    out += '\n';
    return out;
}

}  // namespace siren
