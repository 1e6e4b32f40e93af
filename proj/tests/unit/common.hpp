#pragma once

#include <filesystem>
#include <string>

#include "siren/core/synth.hpp"

namespace siren::test {

inline SynthConfig small_synth(std::uint64_t seed = 3) {
    SynthConfig c;
    c.seed = seed;
    c.n_users = 40;
    c.n_items = 300;
    c.n_clusters = 8;
    c.dim = 16;
    c.min_history = 20;
    c.max_history = 60;
    c.impressions_per_user = 10;
    c.brand_vocab = 10;
    c.user_segment_vocab = 4;
    c.context_vocab = 6;
    return c;
}

// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("siren_unit_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace siren::test
