#include "siren/training/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "siren/errors.hpp"

namespace siren {

double auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size()) throw InputError("auc: scores and labels differ in length");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double pos_rank_sum = 0.0;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * double(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]]) {
                pos_rank_sum += midrank;
                ++pos;
            }
        }
        i = j;
    }
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) return std::nan("");
    return (pos_rank_sum - double(pos) * double(pos + 1) / 2.0) / (double(pos) * double(neg));
}

double gauc(std::span<const UserId> users, std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (users.size() != scores.size() || users.size() != labels.size()) {
        throw InputError("gauc: users, scores and labels differ in length");
    }
    std::vector<std::size_t> order(users.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return users[a] < users[b]; });
    double num = 0.0, weight = 0.0;
    std::vector<double> s;
    std::vector<std::uint8_t> y;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        s.clear();
        y.clear();
        while (j < order.size() && users[order[j]] == users[order[i]]) {
            s.push_back(scores[order[j]]);
            y.push_back(labels[order[j]]);
            ++j;
        }
        const double a = auc(s, y);
        if (!std::isnan(a)) {
            num += a * double(s.size());
            weight += double(s.size());
        }
        i = j;
    }
    if (weight == 0.0) throw DataError("GAUC undefined: no user has both positive and negative impressions");
    return num / weight;
}

}  // namespace siren
