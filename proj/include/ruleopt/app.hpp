#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ruleopt/dataset.hpp"
#include "ruleopt/exact_search.hpp"
#include "ruleopt/heuristics.hpp"
#include "ruleopt/topology.hpp"

namespace ruleopt {

struct RunConfig {
    std::string data;
    std::string schema;
    std::string target;                    // overrides the schema's target
    std::vector<std::string> categorical;  // extra categorical columns
    char delimiter = ',';

    std::optional<int> depth;  // defaults to 2, or the structure's depth
    double weight = 10.0;
    std::string structure;  // chain like "cat-num", or a structure file
    std::string importance;  // ranking file for importance-based groups
    std::size_t top_k = 0;

    double time_limit = 600.0;
    std::uint64_t seed = 0;
    int splits = 10;
    double ratio = 0.8;
    bool holdout = true;  // fit/emit on the train part of a split
    bool warmstart = true;
    bool priorities = true;
    int threads = 1;
    std::size_t beam_width = 5;

    std::string out;  // output directory; nothing is written when empty

    void validate() const;
};

/// Everything derived from the data and config before optimization.
struct Problem {
    Dataset train;
    Dataset test;  // empty without holdout
    std::vector<FeatureGroup> groups;
    StructureSpec spec;
    BscFixings fixings;

    TreeShape shape() const { return spec.shape(); }
};

Dataset load_dataset(const RunConfig& cfg);
std::vector<FeatureGroup> build_groups(const RunConfig& cfg, const Dataset& ds);
StructureSpec resolve_structure(const RunConfig& cfg);
/// Splits (or not), then resolves groups, structure and fixings on train.
Problem prepare(const RunConfig& cfg, const Dataset& ds, std::uint64_t seed);

struct CommandResult {
    std::string text;
    nlohmann::json report;
};

struct FitOutcome {
    Problem problem;
    OptResult opt;
    std::optional<BsccartResult> warm;
    RuleStats train;
    std::optional<RuleStats> test;
};

FitOutcome run_fit(const RunConfig& cfg, const Dataset& ds);

/// Writes rule.json, fit.json and trace.csv into cfg.out.
CommandResult cmd_fit(const RunConfig& cfg);
CommandResult cmd_eval(const RunConfig& cfg, const std::string& rule_file);
CommandResult cmd_sweep(const RunConfig& cfg, const std::vector<double>& weights);
CommandResult cmd_bench(const RunConfig& cfg, const std::vector<std::string>& methods);
/// format is "lp" or "mps".
CommandResult cmd_emit(const RunConfig& cfg, const std::string& format, bool with_warmstart,
                       bool with_priorities);
CommandResult cmd_groups(const RunConfig& cfg);

/// Bench report helpers, exposed for verification.
nlohmann::json aggregate_rows(const nlohmann::json& rows, const std::vector<std::string>& methods);
/// Report with the wall-clock section removed.
nlohmann::json mask_timing(nlohmann::json report);

std::string trace_csv(const std::vector<TracePoint>& trace);

}  // namespace ruleopt
