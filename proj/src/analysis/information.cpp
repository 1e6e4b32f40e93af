#include "siren/analysis/information.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "siren/errors.hpp"
#include "siren/similarity/similarity.hpp"

namespace siren {

double DiscreteJoint::total() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }

std::vector<double> DiscreteJoint::probabilities() const {
    const double n = total();
    if (!(n > 0.0)) throw InputError("contingency table is empty");
    std::vector<double> p(counts.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = counts[i] / n;
    return p;
}

DiscreteJoint make_joint(std::span<const std::uint32_t> groups, std::span<const std::uint8_t> labels,
                         std::size_t n_groups) {
    if (groups.size() != labels.size()) throw InputError("groups and labels differ in length");
    DiscreteJoint j;
    j.labels = 2;
    j.groups = n_groups ? n_groups : (groups.empty() ? 0 : *std::max_element(groups.begin(), groups.end()) + 1);
    j.counts.assign(j.groups * j.labels, 0.0);
    for (std::size_t i = 0; i < groups.size(); ++i) {
        if (groups[i] >= j.groups) throw InputError("group index out of range");
        if (labels[i] > 1) throw InputError("labels must be 0 or 1");
        j.counts[groups[i] * j.labels + labels[i]] += 1.0;
    }
    return j;
}

double entropy(std::span<const double> p) {
    double h = 0.0;
    for (double v : p) {
        if (v > 0.0) h -= v * std::log(v);
    }
    return h;
}

double label_entropy(const DiscreteJoint& joint) {
    const auto p = joint.probabilities();
    std::vector<double> py(joint.labels, 0.0);
    for (std::size_t g = 0; g < joint.groups; ++g) {
        for (std::size_t y = 0; y < joint.labels; ++y) py[y] += p[g * joint.labels + y];
    }
    return entropy(py);
}

double conditional_entropy(const DiscreteJoint& joint) {
    const double n = joint.total();
    if (!(n > 0.0)) throw InputError("contingency table is empty");
    double h = 0.0;
    std::vector<double> cond(joint.labels);
    for (std::size_t g = 0; g < joint.groups; ++g) {
        double ng = 0.0;
        for (std::size_t y = 0; y < joint.labels; ++y) ng += joint.count(g, y);
        if (ng == 0.0) continue;
        for (std::size_t y = 0; y < joint.labels; ++y) cond[y] = joint.count(g, y) / ng;
        h += ng / n * entropy(cond);
    }
    return h;
}

double mutual_information(const DiscreteJoint& joint) {
    const auto p = joint.probabilities();
    std::vector<double> pg(joint.groups, 0.0), py(joint.labels, 0.0);
    for (std::size_t g = 0; g < joint.groups; ++g) {
        for (std::size_t y = 0; y < joint.labels; ++y) {
            pg[g] += p[g * joint.labels + y];
            py[y] += p[g * joint.labels + y];
        }
    }
    double mi = 0.0;
    for (std::size_t g = 0; g < joint.groups; ++g) {
        for (std::size_t y = 0; y < joint.labels; ++y) {
            const double v = p[g * joint.labels + y];
            if (v > 0.0) mi += v * std::log(v / (pg[g] * py[y]));
        }
    }
    return std::max(mi, 0.0);
}

double information_gain(const DiscreteJoint& joint) { return label_entropy(joint) - conditional_entropy(joint); }

DiscreteJoint merge_groups(const DiscreteJoint& joint, std::size_t a, std::size_t b) {
    if (a >= joint.groups || b >= joint.groups || a == b) throw InputError("merge_groups needs two distinct groups");
    DiscreteJoint out;
    out.labels = joint.labels;
    out.groups = joint.groups - 1;
    for (std::size_t g = 0; g < joint.groups; ++g) {
        if (g == b) continue;
        for (std::size_t y = 0; y < joint.labels; ++y) {
            double v = joint.count(g, y);
            if (g == a) v += joint.count(b, y);
            out.counts.push_back(v);
        }
    }
    return out;
}

PermutationNull permutation_null(std::span<const std::uint32_t> groups, std::span<const std::uint8_t> labels,
                                 std::size_t permutations, std::uint64_t seed) {
    if (permutations == 0) throw ConfigError("analysis.permutations must be at least 1");
    PermutationNull out;
    out.permutations = permutations;
    const auto base = make_joint(groups, labels);
    out.observed = mutual_information(base);
    std::vector<std::uint8_t> shuffled(labels.begin(), labels.end());
    std::mt19937_64 rng(seed);
    std::vector<double> null(permutations);
    std::size_t at_least = 0;
    for (std::size_t p = 0; p < permutations; ++p) {
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        null[p] = mutual_information(make_joint(groups, shuffled, base.groups));
        if (null[p] >= out.observed) ++at_least;
    }
    out.p99 = percentile(std::move(null), 99.0);
    out.p_value = double(1 + at_least) / double(1 + permutations);
    return out;
}

}  // namespace siren
