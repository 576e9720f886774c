#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ruleopt/dataset.hpp"
#include "ruleopt/topology.hpp"

namespace ruleopt {

/// Absolute slack (normalized units) used by the split tests.
inline constexpr double kSplitTolerance = 1e-9;

enum class Provenance { exact, bsccart, rscrules, external };

const char* to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

/// below fires when x + epsilon <= threshold (left branch);
/// at_or_above fires when x >= threshold (right branch).
struct Condition {
    std::size_t feature = 0;
    Direction direction = Direction::below;
    double threshold = 0.0;
    double epsilon = 0.0;

    bool fires(double x) const {
        return direction == Direction::below ? x + epsilon <= threshold + kSplitTolerance
                                             : x >= threshold - kSplitTolerance;
    }
    friend bool operator==(const Condition&, const Condition&) = default;
};

struct Rule {
    std::vector<Condition> conditions;
    std::optional<int> label;  // predicted label; recomputed as majority when empty
    Provenance provenance = Provenance::external;
    int leaf = 0;              // target leaf the rule was read from, 0 if unknown
    bool never_fires = false;  // structurally empty leaf

    bool fires(std::span<const double> sample) const;
};

struct ViResult {
    int label = 0;
    long majority = 0;
    long misclassified = 0;
    double vi = 0.0;
};

/// N - w * (N - correct).
inline double vi_value(long fired, long correct, double w) {
    return static_cast<double>(fired) - w * static_cast<double>(fired - correct);
}

void check_weight(double w);

/// Majority label (ties to the smallest index), L and I from per-label counts.
ViResult vi_index(std::span<const long> counts, double w);

struct RuleStats {
    long fired = 0;
    std::vector<long> per_label;
    int label = 0;
    long correct = 0;        // M_t, or count of the fixed label
    long misclassified = 0;  // L_t
    double vi = 0.0;         // I_t
    double precision = 1.0;
    double coverage = 0.0;
    long total = 0;
    bool zero_fired = true;
};

RuleStats evaluate(const Rule& rule, const Dataset& ds, double w);

/// "0.978 (45/46)"
std::string format_ratio(long num, long den);

/// "age >= 37.5 AND color == red => 1"
std::string describe(const Rule& rule, const Dataset& ds);

nlohmann::json rule_to_json(const Rule& rule, const Dataset& ds,
                            const std::optional<RuleStats>& stats = std::nullopt);
/// Rebinds a serialized rule to a dataset by feature name, converting
/// thresholds from original units into the dataset's normalization.
Rule rule_from_json(const nlohmann::json& j, const Dataset& ds);

void save_rule(const std::string& path, const Rule& rule, const Dataset& ds,
               const std::optional<RuleStats>& stats = std::nullopt);
Rule load_rule(const std::string& path, const Dataset& ds);

nlohmann::json stats_to_json(const RuleStats& s, const Dataset& ds);

}  // namespace ruleopt
