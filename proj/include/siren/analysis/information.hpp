#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace siren {

// Contingency counts over (group g, label y), row-major groups x labels.
struct DiscreteJoint {
    std::size_t groups = 0;
    std::size_t labels = 2;
    std::vector<double> counts;

    double count(std::size_t g, std::size_t y) const { return counts[g * labels + y]; }
    double total() const;
    // p(g, y) = count / total. Throws InputError when the table is empty.
    std::vector<double> probabilities() const;
};

// Groups are dense indices; `groups` defaults to max(group) + 1.
DiscreteJoint make_joint(std::span<const std::uint32_t> groups, std::span<const std::uint8_t> labels,
                         std::size_t n_groups = 0);

// Plug-in estimates in nats, 0 ln 0 = 0.
double entropy(std::span<const double> probabilities);
double label_entropy(const DiscreteJoint& joint);        // H(Y)
double conditional_entropy(const DiscreteJoint& joint);  // H(Y|G)

// I(G;Y) = sum p(g,y) ln(p(g,y) / (p(g) p(y))).
double mutual_information(const DiscreteJoint& joint);
// H(Y) - H(Y|G), computed from the entropies rather than the MI sum.
double information_gain(const DiscreteJoint& joint);

// Merges group b into group a (b's row is removed).
DiscreteJoint merge_groups(const DiscreteJoint& joint, std::size_t a, std::size_t b);

struct PermutationNull {
    double observed = 0.0;
    double p99 = 0.0;          // 99th percentile of MI under shuffled labels
    double p_value = 0.0;      // (1 + #{null >= observed}) / (1 + permutations)
    std::size_t permutations = 0;
};

// Shuffles labels against fixed groups with a seeded generator.
PermutationNull permutation_null(std::span<const std::uint32_t> groups, std::span<const std::uint8_t> labels,
                                 std::size_t permutations, std::uint64_t seed);

}  // namespace siren
