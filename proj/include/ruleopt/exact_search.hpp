#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ruleopt/dataset.hpp"
#include "ruleopt/rule.hpp"
#include "ruleopt/topology.hpp"

namespace ruleopt {

/// One threshold per achievable left/right partition of a feature:
/// for adjacent distinct values v_j < v_{j+1}, b = max(midpoint, v_j + ε_p),
/// which keeps the ε-adjusted left test and the right test disjoint and
/// exhaustive. One-hot features yield {0.5}.
std::vector<double> candidate_thresholds(const Dataset& ds, std::size_t feature);

/// True when max_i x_ip + ε_p <= 1, so b = 1 routes every sample left.
/// Never the case for min-max normalized columns.
bool all_left_admissible(const Dataset& ds, std::size_t feature);

/// Thresholds a branch node may use for a feature: the fixed b if the node
/// has one, otherwise b = 0 (all right), the candidates, and b = 1 when it
/// sends everything left.
std::vector<double> admissible_thresholds(const Dataset& ds, std::size_t feature,
                                          const NodeFixing& node);

/// Empty if the rule can be produced by some tree under the fixings,
/// otherwise the reason it cannot.
std::optional<std::string> admissibility_error(const Rule& rule, const BscFixings& fixings,
                                               const TreeShape& shape);

enum class SolveStatus { optimal, time_limit };

const char* to_string(SolveStatus s);

struct TracePoint {
    int step = 0;
    double vi = 0.0;
    double seconds = 0.0;
};

struct SearchBudget {
    double time_limit = 600.0;
    std::optional<Rule> incumbent;
};

struct SearchOptions {
    int threads = 1;         // 0 = hardware concurrency
    bool priorities = true;  // explore tasks by descending bound
    std::function<void(const TracePoint&)> on_improvement;
};

struct OptResult {
    Rule rule;
    double i_max = 0.0;
    double upper_bound = 0.0;
    SolveStatus status = SolveStatus::optimal;
    double elapsed = 0.0;
    double time_to_best = 0.0;
    long nodes = 0;
    std::vector<TracePoint> trace;
};

/// Maximizes the VI index over every tree admissible under the fixings.
/// Each target leaf's sample set depends only on the splits along its own
/// path, so paths are optimized independently by a depth-first conjunction
/// search. A partial set S is pruned when max_k |S_k| cannot beat the best
/// value, which is admissible because refinement never raises the count of
/// correctly labelled samples and w >= 1. Among optimal rules the one with
/// the smallest (leaf, feature, threshold, ...) sequence is returned,
/// independent of thread scheduling and of the incumbent.
OptResult solve(const Dataset& ds, const TreeShape& shape, const BscFixings& fixings, double w,
                const SearchBudget& budget = {}, const SearchOptions& options = {});

struct OracleResult {
    double i_max = 0.0;
    Rule rule;
    long evaluated = 0;
};

/// Exhaustive enumeration of every admissible threshold combination on
/// every target path, each candidate evaluated by firing the rule.
OracleResult brute_force_oracle(const Dataset& ds, const TreeShape& shape,
                                const BscFixings& fixings, double w, long cap = 20'000'000);

}  // namespace ruleopt
