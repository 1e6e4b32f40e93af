#include "siren/core/split.hpp"

#include <algorithm>
#include <random>
#include <unordered_set>

#include "siren/errors.hpp"

namespace siren {

Split split(const Corpus& corpus, const SplitConfig& config) {
    if (config.eval_fraction <= 0.0 || config.eval_fraction >= 1.0) {
        throw ConfigError("split.eval_fraction must lie in (0, 1)");
    }
    const auto& imps = corpus.impressions;
    Split out;

    if (config.policy == SplitPolicy::TimeHoldout) {
        Timestamp cut;
        if (config.cut) {
            cut = *config.cut;
        } else {
            if (imps.empty()) throw ConfigError("cannot split a corpus without impressions");
            std::vector<Timestamp> times;
            times.reserve(imps.size());
            for (const auto& imp : imps) times.push_back(imp.event_time);
            const auto k = static_cast<std::size_t>((1.0 - config.eval_fraction) * double(times.size() - 1));
            std::nth_element(times.begin(), times.begin() + k, times.end());
            cut = times[k];
        }
        for (std::size_t i = 0; i < imps.size(); ++i) {
            (imps[i].event_time > cut ? out.eval : out.train).push_back(i);
        }
    } else {
        std::vector<UserId> users;
        users.reserve(corpus.sequences.size());
        for (const auto& s : corpus.sequences) users.push_back(s.user_id);
        std::sort(users.begin(), users.end());
        std::mt19937_64 rng(config.seed);
        std::shuffle(users.begin(), users.end(), rng);
        const auto n_eval = static_cast<std::size_t>(config.eval_fraction * double(users.size()) + 0.5);
        const std::unordered_set<UserId> held(users.begin(), users.begin() + std::min(n_eval, users.size()));
        for (std::size_t i = 0; i < imps.size(); ++i) {
            (held.count(imps[i].user_id) ? out.eval : out.train).push_back(i);
        }
    }

    if (out.train.empty()) throw ConfigError("split produced an empty train side");
    if (out.eval.empty()) throw ConfigError("split produced an empty eval side");
    return out;
}

}  // namespace siren
