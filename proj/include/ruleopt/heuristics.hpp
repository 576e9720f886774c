#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ruleopt/dataset.hpp"
#include "ruleopt/rule.hpp"
#include "ruleopt/topology.hpp"

namespace ruleopt {

struct HeuristicNode {
    int node = 0;
    bool split = false;
    std::optional<std::size_t> feature;  // set on split nodes
    double threshold = 0.0;
    bool degenerate = false;  // forced split chosen without a proper partition
    std::vector<long> counts;  // per-label counts of the samples reaching the node
};

/// Complete tree; nodes[t-1] describes node t.
struct HeuristicTree {
    int depth = 1;
    std::vector<HeuristicNode> nodes;

    const HeuristicNode& node(int t) const { return nodes[t - 1]; }
    std::string dump(const Dataset& ds) const;
};

struct BsccartResult {
    HeuristicTree tree;
    Rule rule;
    double vi = 0.0;
};

/// Greedy Gini growth restricted to the fixings, then the best target leaf.
BsccartResult bsccart_fit(const Dataset& ds, const TreeShape& shape, const BscFixings& fixings, double w);

/// Beam search that adds one condition per tree level along the fixings.
/// beam_width 0 keeps every candidate.
Rule rscrules_fit(const Dataset& ds, const TreeShape& shape, const BscFixings& fixings, double w,
                  std::size_t beam_width = 5);

}  // namespace ruleopt
