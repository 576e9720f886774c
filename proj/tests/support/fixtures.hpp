#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ruleopt/dataset.hpp"
#include "ruleopt/rule.hpp"
#include "ruleopt/topology.hpp"

namespace fixtures {

using namespace ruleopt;

/// Dataset from normalized rows. kinds defaults to all numerical.
Dataset matrix(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
               std::vector<FeatureKind> kinds = {}, int num_labels = 2);

/// 64 samples on one feature whose ordered labels give a known weight sweep:
/// 38 ones, a zero, 7 ones, a zero, 3 ones, four zeros,
/// 5 ones, five zeros, from the largest value down.
Dataset sensitivity();

struct Instance {
    Dataset ds;
    StructureSpec spec;
    std::vector<FeatureGroup> groups;
    BscFixings fixings;
    double w = 10.0;

    TreeShape shape() const { return spec.shape(); }
};

/// Random small problem: |N| in [4, max_n], |P| in [1, max_p] mixing
/// numerical (coarse grid) and one-hot columns, depth in [1, max_depth],
/// random split flags, groups and targets, w drawn from weights.
Instance random_instance(std::mt19937_64& rng, int max_n, int max_p, int max_depth,
                         const std::vector<double>& weights);

/// Instance with an explicit chain over default groups, all split, all targeted.
Instance with_chain(Dataset ds, const std::string& chain, double w);

struct Planted {
    Dataset ds;
    std::set<std::pair<std::size_t, Direction>> signature;  // planted (feature, direction) pairs
    long positives = 0;
};

/// Label 1 exactly when x_a >= 0.6 and x_b < 0.3; n samples, p features.
Planted planted(int n, int p, std::uint64_t seed);

/// Two-feature checkerboard where no single split is informative.
Dataset checkerboard();

/// Two numerical columns plus one three-level categorical column.
Dataset mixed(std::uint64_t seed);

/// CSV text with a categorical column where label is "yes" exactly when
/// age >= 40 and color is red (about 60% of rows), for CLI tests.
std::string planted_csv(int n, std::uint64_t seed);

}  // namespace fixtures
