// ruleopt command-line front end.
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ruleopt/app.hpp"
#include "ruleopt/error.hpp"

namespace {

using ruleopt::RunConfig;

void add_data_flags(CLI::App& cmd, RunConfig& cfg) {
    cmd.add_option("--data", cfg.data, "CSV data file")->required();
    cmd.add_option("--schema", cfg.schema, "column kinds file (name kind per line)");
    cmd.add_option("--target", cfg.target, "target column (overrides the schema)");
    cmd.add_option("--categorical", cfg.categorical, "columns to treat as categorical")->delimiter(',');
    cmd.add_option("--delimiter", cfg.delimiter, "field delimiter");
}

void add_model_flags(CLI::App& cmd, RunConfig& cfg, int& depth) {
    cmd.add_option("--depth", depth, "tree depth D (default 2)")->check(CLI::PositiveNumber);
    cmd.add_option("--weight", cfg.weight, "VI weight w >= 1")->capture_default_str();
    cmd.add_option("--structure", cfg.structure, "group chain such as cat-num, or a structure file");
    cmd.add_option("--importance", cfg.importance, "feature ranking file for top_num/top_cat groups");
    cmd.add_option("--top-k", cfg.top_k, "columns kept from the ranking");
    cmd.add_option("--time-limit", cfg.time_limit, "search time limit in seconds")->capture_default_str();
    cmd.add_option("--seed", cfg.seed, "split seed")->capture_default_str();
    cmd.add_option("--ratio", cfg.ratio, "train fraction")->capture_default_str();
    cmd.add_flag("!--no-holdout", cfg.holdout, "use all rows for training");
    cmd.add_option("--warmstart", cfg.warmstart, "seed the search with BSCCART (on/off)")->capture_default_str();
    cmd.add_option("--priorities", cfg.priorities, "explore by bound order (on/off)")->capture_default_str();
    cmd.add_option("--threads", cfg.threads, "worker threads, 0 = all cores")->capture_default_str();
    cmd.add_option("--out", cfg.out, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal single-rule discovery with structure-constrained trees"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "ruleopt 1.0.0");

    RunConfig cfg;
    int depth = 0;
    std::string rule_file;
    std::vector<double> weights{10, 9, 8, 7, 6, 5, 4, 3, 2};
    std::vector<std::string> methods{"opdt", "bsccart", "rscrules"};
    std::string format = "lp";
    bool emit_warm = true, emit_prio = true;

    auto* fit = app.add_subcommand("fit", "find the VI-optimal rule");
    add_data_flags(*fit, cfg);
    add_model_flags(*fit, cfg, depth);

    auto* eval = app.add_subcommand("eval", "evaluate a saved rule on a dataset");
    add_data_flags(*eval, cfg);
    eval->add_option("--rule", rule_file, "rule file written by fit")->required();
    eval->add_option("--weight", cfg.weight, "VI weight w >= 1")->capture_default_str();
    eval->add_option("--out", cfg.out, "output directory");

    auto* sweep = app.add_subcommand("sweep", "fit once per weight on a fixed split");
    add_data_flags(*sweep, cfg);
    add_model_flags(*sweep, cfg, depth);
    sweep->add_option("--weights", weights, "weights to sweep")->delimiter(',')->capture_default_str();

    auto* bench = app.add_subcommand("bench", "compare methods over random splits");
    add_data_flags(*bench, cfg);
    add_model_flags(*bench, cfg, depth);
    bench->add_option("--splits", cfg.splits, "number of random splits")->capture_default_str();
    bench->add_option("--methods", methods, "opdt, bsccart, rscrules")->delimiter(',')->capture_default_str();
    bench->add_option("--beam-width", cfg.beam_width, "RSCRULES beam width, 0 = unbounded")->capture_default_str();

    auto* emit = app.add_subcommand("emit", "write the MIP model and sidecars");
    add_data_flags(*emit, cfg);
    add_model_flags(*emit, cfg, depth);
    emit->add_option("--format", format, "lp or mps")->capture_default_str();
    emit->add_option("--with-warmstart", emit_warm, "write a start vector (on/off)")->capture_default_str();
    emit->add_option("--with-priorities", emit_prio, "write branching priorities (on/off)")->capture_default_str();

    auto* groups = app.add_subcommand("groups", "print feature groups");
    add_data_flags(*groups, cfg);
    groups->add_option("--importance", cfg.importance, "feature ranking file");
    groups->add_option("--top-k", cfg.top_k, "columns kept from the ranking");

    CLI11_PARSE(app, argc, argv);
    if (depth > 0) cfg.depth = depth;

    try {
        ruleopt::CommandResult res;
        if (*fit)
            res = ruleopt::cmd_fit(cfg);
        else if (*eval)
            res = ruleopt::cmd_eval(cfg, rule_file);
        else if (*sweep)
            res = ruleopt::cmd_sweep(cfg, weights);
        else if (*bench)
            res = ruleopt::cmd_bench(cfg, methods);
        else if (*emit)
            res = ruleopt::cmd_emit(cfg, format, emit_warm, emit_prio);
        else
            res = ruleopt::cmd_groups(cfg);
        std::cout << res.text;
    } catch (const ruleopt::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.module() == "cli" ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
