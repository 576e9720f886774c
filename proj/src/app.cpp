#include "ruleopt/app.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ruleopt/error.hpp"
#include "ruleopt/mip_model.hpp"

namespace ruleopt {

namespace {
constexpr const char* kModule = "cli";
constexpr const char* kFitFormat = "ruleopt.fit/1";
constexpr const char* kSweepFormat = "ruleopt.sweep/1";
constexpr const char* kBenchFormat = "ruleopt.bench/1";

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool parses_as_number(const std::string& s) {
    const char* b = s.c_str();
    char* end = nullptr;
    std::strtod(b, &end);
    if (end == b) return false;
    while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
    return *end == '\0';
}

void write_file(const std::string& dir, const std::string& name, const std::string& content) {
    std::filesystem::create_directories(dir);
    auto path = (std::filesystem::path(dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(kModule, "cannot write '" + path + "'");
    out << content;
    if (!out) throw Error(kModule, "write failed for '" + path + "'");
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string vi_text(double v) {
    return v == std::floor(v) && std::abs(v) < 1e15 ? fmt("%.0f", v) : fmt("%.3f", v);
}

std::string chain_text(const StructureSpec& s) {
    std::string out;
    for (std::size_t i = 0; i < s.group.size(); ++i) out += (i ? "," : "") + s.group[i];
    return out;
}

nlohmann::json config_json(const RunConfig& cfg, const StructureSpec& spec) {
    return {{"depth", spec.depth},
            {"weight", cfg.weight},
            {"groups", chain_text(spec)},
            {"time_limit", cfg.time_limit},
            {"seed", cfg.seed},
            {"ratio", cfg.ratio},
            {"holdout", cfg.holdout},
            {"warmstart", cfg.warmstart},
            {"priorities", cfg.priorities}};
}

std::string stats_line(const RuleStats& s) {
    return "precision " + format_ratio(s.correct, s.fired) + "  coverage " + format_ratio(s.fired, s.total) +
           "  VI " + vi_text(s.vi);
}

}  // namespace

void RunConfig::validate() const {
    if (!(weight >= 1.0) || !std::isfinite(weight)) throw Error(kModule, "--weight must be >= 1");
    if (depth && *depth < 1) throw Error(kModule, "--depth must be >= 1");
    if (!(ratio > 0.0 && ratio < 1.0)) throw Error(kModule, "--ratio must lie strictly between 0 and 1");
    if (!(time_limit >= 0.0)) throw Error(kModule, "--time-limit must be >= 0");
    if (splits < 1) throw Error(kModule, "--splits must be >= 1");
    if (threads < 0) throw Error(kModule, "--threads must be >= 0");
    if (data.empty()) throw Error(kModule, "--data is required");
}

Dataset load_dataset(const RunConfig& cfg) {
    Schema schema;
    if (!cfg.schema.empty()) schema = Schema::from_file(cfg.schema);
    if (!cfg.target.empty()) {
        schema.kinds.erase(cfg.target);
        schema.target = cfg.target;
    }
    if (schema.target.empty()) throw Error(kModule, "no target column: pass --target or a schema file");
    for (const auto& c : cfg.categorical) schema.kinds[c] = ColumnKind::categorical;

    LoadOptions opts;
    opts.delimiter = cfg.delimiter;
    std::ifstream in(cfg.data, std::ios::binary);
    if (!in) throw Error("dataset", "cannot open data file '" + cfg.data + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();

    // Undeclared columns holding non-numeric values are treated as categorical.
    {
        Schema probe = schema;
        auto header = parse_table(text.substr(0, text.find('\n')) + "\n", schema, opts).columns;
        for (const auto& c : header)
            if (c != schema.target && !probe.kinds.count(c)) probe.kinds[c] = ColumnKind::categorical;
        RawTable raw = parse_table(text, probe, opts);
        for (std::size_t j = 0; j < raw.columns.size(); ++j) {
            const auto& name = raw.columns[j];
            if (name == schema.target || schema.kinds.count(name)) continue;
            bool numeric = true;
            for (const auto& row : raw.rows)
                if (!is_missing(row[j]) && !parses_as_number(std::get<std::string>(row[j]))) numeric = false;
            schema.kinds[name] = numeric ? ColumnKind::numerical : ColumnKind::categorical;
        }
    }
    return preprocess(parse_table(text, schema, opts));
}

std::vector<FeatureGroup> build_groups(const RunConfig& cfg, const Dataset& ds) {
    auto groups = derive_default_groups(ds);
    if (!cfg.importance.empty()) {
        if (cfg.top_k == 0) throw Error(kModule, "--importance needs --top-k");
        for (auto& g : groups_from_importance(ds, cfg.importance, cfg.top_k)) groups.push_back(std::move(g));
    }
    return groups;
}

StructureSpec resolve_structure(const RunConfig& cfg) {
    StructureSpec spec;
    if (cfg.structure.empty()) {
        spec = StructureSpec::from_chain(std::vector<std::string>(cfg.depth.value_or(2), "all"));
    } else if (std::filesystem::is_regular_file(cfg.structure)) {
        spec = StructureSpec::from_file(cfg.structure);
    } else {
        spec = StructureSpec::from_chain(cfg.structure);
    }
    if (cfg.depth && *cfg.depth != spec.depth)
        throw Error(kModule, "--depth " + std::to_string(*cfg.depth) + " disagrees with structure depth " +
                                 std::to_string(spec.depth));
    return spec;
}

Problem prepare(const RunConfig& cfg, const Dataset& ds, std::uint64_t seed) {
    Problem p;
    if (cfg.holdout) {
        auto [train, test] = train_test_split(ds, cfg.ratio, seed);
        p.train = std::move(train);
        p.test = std::move(test);
    } else {
        p.train = ds;
    }
    p.groups = build_groups(cfg, p.train);
    p.spec = resolve_structure(cfg);
    p.fixings = apply_bsc(p.spec, p.spec.shape(), p.train, p.groups);
    return p;
}

FitOutcome run_fit(const RunConfig& cfg, const Dataset& ds) {
    FitOutcome out;
    out.problem = prepare(cfg, ds, cfg.seed);
    const auto& pb = out.problem;
    const TreeShape shape = pb.shape();
    SearchBudget budget;
    budget.time_limit = cfg.time_limit;
    if (cfg.warmstart) {
        out.warm = bsccart_fit(pb.train, shape, pb.fixings, cfg.weight);
        budget.incumbent = out.warm->rule;
    }
    SearchOptions opts;
    opts.threads = cfg.threads;
    opts.priorities = cfg.priorities;
    out.opt = solve(pb.train, shape, pb.fixings, cfg.weight, budget, opts);
    out.train = evaluate(out.opt.rule, pb.train, cfg.weight);
    if (cfg.holdout) out.test = evaluate(out.opt.rule, pb.test, cfg.weight);
    return out;
}

std::string trace_csv(const std::vector<TracePoint>& trace) {
    std::ostringstream out;
    out << "step,vi,seconds\n";
    for (const auto& t : trace) out << t.step << ',' << vi_text(t.vi) << ',' << fmt("%.6f", t.seconds) << "\n";
    return out.str();
}

CommandResult cmd_fit(const RunConfig& cfg) {
    cfg.validate();
    Dataset ds = load_dataset(cfg);
    FitOutcome fo = run_fit(cfg, ds);
    const auto& pb = fo.problem;

    CommandResult res;
    auto& j = res.report;
    j["format"] = kFitFormat;
    j["config"] = config_json(cfg, pb.spec);
    j["status"] = to_string(fo.opt.status);
    j["i_max"] = fo.opt.i_max;
    j["upper_bound"] = fo.opt.upper_bound;
    j["nodes"] = fo.opt.nodes;
    j["rule"] = rule_to_json(fo.opt.rule, pb.train, fo.train);
    j["train"] = stats_to_json(fo.train, pb.train);
    if (fo.test) j["test"] = stats_to_json(*fo.test, pb.test);
    if (fo.warm) j["warmstart"] = {{"vi", fo.warm->vi}, {"rule", describe(fo.warm->rule, pb.train)}};
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& t : fo.opt.trace) trace.push_back({{"step", t.step}, {"vi", t.vi}, {"seconds", t.seconds}});
    j["timing"] = {{"elapsed", fo.opt.elapsed}, {"time_to_best", fo.opt.time_to_best}, {"trace", trace}};

    std::ostringstream t;
    t << "status       " << to_string(fo.opt.status) << "\n";
    t << "I_max        " << vi_text(fo.opt.i_max);
    if (fo.opt.status != SolveStatus::optimal) t << "  (bound " << vi_text(fo.opt.upper_bound) << ")";
    t << "\n";
    t << "rule         " << describe(fo.opt.rule, pb.train) << "\n";
    t << "train        " << stats_line(fo.train) << "\n";
    if (fo.test) t << "test         " << stats_line(*fo.test) << "\n";
    if (fo.warm) t << "warmstart    VI " << vi_text(fo.warm->vi) << "  " << describe(fo.warm->rule, pb.train) << "\n";
    t << "runtime      " << fmt("%.3f", fo.opt.elapsed) << " s  (best at " << fmt("%.3f", fo.opt.time_to_best)
      << " s, " << fo.opt.nodes << " nodes)\n";
    t << "trace\n";
    for (const auto& tp : fo.opt.trace)
        t << "  " << tp.step << "  " << vi_text(tp.vi) << "  " << fmt("%.3f", tp.seconds) << "\n";
    res.text = t.str();

    if (!cfg.out.empty()) {
        write_file(cfg.out, "rule.json", rule_to_json(fo.opt.rule, pb.train, fo.train).dump(2) + "\n");
        write_file(cfg.out, "fit.json", j.dump(2) + "\n");
        write_file(cfg.out, "trace.csv", trace_csv(fo.opt.trace));
    }
    return res;
}

CommandResult cmd_eval(const RunConfig& cfg, const std::string& rule_file) {
    if (!(cfg.weight >= 1.0)) throw Error(kModule, "--weight must be >= 1");
    if (cfg.data.empty()) throw Error(kModule, "--data is required");
    Dataset ds = load_dataset(cfg);
    Rule rule = load_rule(rule_file, ds);
    RuleStats s = evaluate(rule, ds, cfg.weight);

    CommandResult res;
    res.report = {{"format", "ruleopt.eval/1"},
                  {"rule", describe(rule, ds)},
                  {"weight", cfg.weight},
                  {"stats", stats_to_json(s, ds)}};
    std::ostringstream t;
    t << "rule        " << describe(rule, ds) << "\n";
    t << "precision   " << format_ratio(s.correct, s.fired) << "\n";
    t << "coverage    " << format_ratio(s.fired, s.total) << "\n";
    t << "VI          " << vi_text(s.vi) << "  (w = " << cfg.weight << ")\n";
    if (s.zero_fired) t << "note        the rule fires on no sample\n";
    res.text = t.str();
    if (!cfg.out.empty()) write_file(cfg.out, "eval.json", res.report.dump(2) + "\n");
    return res;
}

CommandResult cmd_sweep(const RunConfig& cfg, const std::vector<double>& weights) {
    if (weights.empty()) throw Error(kModule, "sweep needs at least one weight");
    for (double w : weights) {
        RunConfig c = cfg;
        c.weight = w;
        c.validate();
    }
    Dataset ds = load_dataset(cfg);

    CommandResult res;
    auto& j = res.report;
    j["format"] = kSweepFormat;
    j["rows"] = nlohmann::json::array();
    nlohmann::json timing = nlohmann::json::array();
    std::ostringstream t;
    char head[256];
    std::snprintf(head, sizeof head, "%-6s %-10s %-18s %-18s %-8s %-18s %-18s %-8s %s\n", "w", "status",
                  "train precision", "train coverage", "train VI", "test precision", "test coverage", "test VI",
                  "runtime");
    t << head;
    for (double w : weights) {
        RunConfig c = cfg;
        c.weight = w;
        FitOutcome fo = run_fit(c, ds);
        const auto& pb = fo.problem;
        nlohmann::json row{{"weight", w},
                           {"status", to_string(fo.opt.status)},
                           {"i_max", fo.opt.i_max},
                           {"rule", describe(fo.opt.rule, pb.train)},
                           {"train", stats_to_json(fo.train, pb.train)}};
        if (fo.test) row["test"] = stats_to_json(*fo.test, pb.test);
        j["rows"].push_back(row);
        timing.push_back({{"weight", w}, {"runtime", fo.opt.elapsed}, {"time_to_best", fo.opt.time_to_best}});

        const RuleStats& a = fo.train;
        char line[512];
        std::string tp = "-", tc = "-", tv = "-";
        if (fo.test) {
            tp = format_ratio(fo.test->correct, fo.test->fired);
            tc = format_ratio(fo.test->fired, fo.test->total);
            tv = vi_text(fo.test->vi);
        }
        std::snprintf(line, sizeof line, "%-6s %-10s %-18s %-18s %-8s %-18s %-18s %-8s %.3f\n",
                      vi_text(w).c_str(), to_string(fo.opt.status), format_ratio(a.correct, a.fired).c_str(),
                      format_ratio(a.fired, a.total).c_str(), vi_text(a.vi).c_str(), tp.c_str(), tc.c_str(),
                      tv.c_str(), fo.opt.elapsed);
        t << line;
    }
    j["timing"] = timing;
    res.text = t.str();
    if (!cfg.out.empty()) write_file(cfg.out, "sweep.json", j.dump(2) + "\n");
    return res;
}

nlohmann::json aggregate_rows(const nlohmann::json& rows, const std::vector<std::string>& methods) {
    static const std::vector<std::pair<std::string, std::string>> metrics{
        {"train", "precision"}, {"train", "coverage"}, {"train", "vi"},
        {"test", "precision"},  {"test", "coverage"},  {"test", "vi"}};
    nlohmann::json agg = nlohmann::json::object();
    for (const auto& m : methods) {
        nlohmann::json per = nlohmann::json::object();
        for (const auto& [part, key] : metrics) {
            std::vector<double> xs;
            for (const auto& r : rows)
                if (r.at("method") == m && r.at("ok").get<bool>()) xs.push_back(r.at(part).at(key).get<double>());
            double mean = 0.0, var = 0.0;
            for (double x : xs) mean += x;
            if (!xs.empty()) mean /= static_cast<double>(xs.size());
            for (double x : xs) var += (x - mean) * (x - mean);
            if (!xs.empty()) var /= static_cast<double>(xs.size());
            per[part + "_" + key] = {{"mean", mean}, {"std", std::sqrt(var)}, {"n", xs.size()}};
        }
        agg[m] = per;
    }
    return agg;
}

nlohmann::json mask_timing(nlohmann::json report) {
    report.erase("timing");
    return report;
}

CommandResult cmd_bench(const RunConfig& cfg, const std::vector<std::string>& methods) {
    cfg.validate();
    if (methods.empty()) throw Error(kModule, "bench needs at least one method");
    for (const auto& m : methods)
        if (m != "opdt" && m != "bsccart" && m != "rscrules")
            throw Error(kModule, "unknown method '" + m + "' (expected opdt, bsccart, rscrules)");
    if (!cfg.holdout) throw Error(kModule, "bench always evaluates on held-out splits");
    Dataset ds = load_dataset(cfg);

    nlohmann::json rows = nlohmann::json::array();
    nlohmann::json timing_rows = nlohmann::json::array();
    for (int s = 0; s < cfg.splits; ++s) {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(s);
        std::optional<Problem> pb;
        std::string prep_error;
        try {
            pb = prepare(cfg, ds, seed);
        } catch (const std::exception& e) {
            prep_error = e.what();
        }
        for (const auto& m : methods) {
            nlohmann::json row{{"split", s}, {"seed", seed}, {"method", m}};
            double runtime = 0.0, ttb = 0.0;
            try {
                if (!pb) throw Error(kModule, prep_error);
                const TreeShape shape = pb->shape();
                auto t0 = Clock::now();
                Rule rule;
                std::string status = "heuristic";
                if (m == "opdt") {
                    SearchBudget budget;
                    budget.time_limit = cfg.time_limit;
                    if (cfg.warmstart) budget.incumbent = bsccart_fit(pb->train, shape, pb->fixings, cfg.weight).rule;
                    SearchOptions opts;
                    opts.threads = cfg.threads;
                    opts.priorities = cfg.priorities;
                    auto r = solve(pb->train, shape, pb->fixings, cfg.weight, budget, opts);
                    rule = r.rule;
                    status = to_string(r.status);
                    row["i_max"] = r.i_max;
                    runtime = seconds_since(t0);
                    ttb = r.time_to_best;
                } else if (m == "bsccart") {
                    rule = bsccart_fit(pb->train, shape, pb->fixings, cfg.weight).rule;
                    runtime = ttb = seconds_since(t0);
                } else {
                    rule = rscrules_fit(pb->train, shape, pb->fixings, cfg.weight, cfg.beam_width);
                    runtime = ttb = seconds_since(t0);
                }
                auto tr = evaluate(rule, pb->train, cfg.weight);
                auto te = evaluate(rule, pb->test, cfg.weight);
                row["ok"] = true;
                row["status"] = status;
                row["rule"] = describe(rule, pb->train);
                row["train"] = stats_to_json(tr, pb->train);
                row["test"] = stats_to_json(te, pb->test);
            } catch (const std::exception& e) {
                row["ok"] = false;
                row["error"] = e.what();
            }
            rows.push_back(row);
            timing_rows.push_back({{"split", s}, {"method", m}, {"runtime", runtime}, {"time_to_best", ttb}});
        }
    }

    CommandResult res;
    auto& j = res.report;
    j["schema"] = kBenchFormat;
    j["config"] = {{"depth", resolve_structure(cfg).depth},
                   {"weight", cfg.weight},
                   {"structure", cfg.structure.empty() ? "all" : cfg.structure},
                   {"time_limit", cfg.time_limit},
                   {"seed", cfg.seed},
                   {"splits", cfg.splits},
                   {"ratio", cfg.ratio},
                   {"warmstart", cfg.warmstart},
                   {"priorities", cfg.priorities},
                   {"beam_width", cfg.beam_width}};
    j["methods"] = methods;
    j["rows"] = rows;
    j["aggregates"] = aggregate_rows(rows, methods);
    {
        nlohmann::json tagg = nlohmann::json::object();
        for (const auto& m : methods) {
            for (const char* key : {"runtime", "time_to_best"}) {
                std::vector<double> xs;
                for (const auto& r : timing_rows)
                    if (r.at("method") == m) xs.push_back(r.at(key).get<double>());
                double mean = 0.0, var = 0.0;
                for (double x : xs) mean += x;
                mean /= static_cast<double>(xs.size());
                for (double x : xs) var += (x - mean) * (x - mean);
                tagg[m][key] = {{"mean", mean}, {"std", std::sqrt(var / static_cast<double>(xs.size()))}};
            }
        }
        j["timing"] = {{"rows", timing_rows}, {"aggregates", tagg}};
    }

    std::ostringstream t;
    char line[512];
    std::snprintf(line, sizeof line, "%-10s %-24s %-24s %-24s %-24s %s\n", "method", "train VI", "test VI",
                  "test precision", "test coverage", "runtime s");
    t << line;
    auto pm = [](const nlohmann::json& a, const char* f) {
        char b[64];
        std::snprintf(b, sizeof b, f, a.at("mean").get<double>(), a.at("std").get<double>());
        return std::string(b);
    };
    for (const auto& m : methods) {
        const auto& a = j["aggregates"][m];
        std::snprintf(line, sizeof line, "%-10s %-24s %-24s %-24s %-24s %s\n", m.c_str(),
                      pm(a["train_vi"], "%.2f (+-%.2f)").c_str(), pm(a["test_vi"], "%.2f (+-%.2f)").c_str(),
                      pm(a["test_precision"], "%.3f (+-%.3f)").c_str(),
                      pm(a["test_coverage"], "%.3f (+-%.3f)").c_str(),
                      pm(j["timing"]["aggregates"][m]["runtime"], "%.3f (+-%.3f)").c_str());
        t << line;
    }
    for (const auto& r : rows)
        if (!r["ok"].get<bool>())
            t << "failed: split " << r["split"] << " " << r["method"].get<std::string>() << ": "
              << r["error"].get<std::string>() << "\n";
    res.text = t.str();
    if (!cfg.out.empty()) write_file(cfg.out, "bench.json", j.dump(2) + "\n");
    return res;
}

CommandResult cmd_emit(const RunConfig& cfg, const std::string& format, bool with_warmstart,
                       bool with_priorities) {
    if (format != "lp" && format != "mps") throw Error(kModule, "unknown --format '" + format + "' (lp or mps)");
    cfg.validate();
    Dataset ds = load_dataset(cfg);
    Problem pb = prepare(cfg, ds, cfg.seed);
    const TreeShape shape = pb.shape();
    MipModel model = build(pb.train, shape, pb.fixings, cfg.weight);

    std::ostringstream model_text;
    if (format == "lp")
        write_lp(model, model_text);
    else
        write_mps(model, model_text);

    CommandResult res;
    auto census = census_of(model);
    res.report = {{"format", "ruleopt.emit/1"},
                  {"model_format", format},
                  {"variables", census.total_variables()},
                  {"rows", census.total_rows()}};
    std::ostringstream t;
    t << "model        " << census.total_variables() << " variables, " << census.total_rows() << " rows\n";

    std::string warm_text, prio_text;
    if (with_warmstart) {
        auto bc = bsccart_fit(pb.train, shape, pb.fixings, cfg.weight);
        auto x = warmstart_assignment(model, bc.rule, pb.train);
        auto rep = check_feasibility(model, x);
        if (!rep.feasible)
            throw Error("mip_model", "warmstart violates the model: " + rep.violations.front());
        std::ostringstream w;
        write_assignment(model, x, w);
        warm_text = w.str();
        res.report["warmstart_vi"] = bc.vi;
        t << "warmstart    VI " << vi_text(bc.vi) << ", feasible (max violation " << rep.max_violation << ")\n";
    }
    if (with_priorities) {
        std::ostringstream p;
        write_priorities(model, p);
        prio_text = p.str();
    }
    if (!cfg.out.empty()) {
        write_file(cfg.out, "model." + format, model_text.str());
        if (with_warmstart) write_file(cfg.out, "model.start", warm_text);
        if (with_priorities) write_file(cfg.out, "model.prio", prio_text);
        t << "written to   " << cfg.out << "\n";
    } else {
        t << model_text.str();
    }
    res.text = t.str();
    return res;
}

CommandResult cmd_groups(const RunConfig& cfg) {
    if (cfg.data.empty()) throw Error(kModule, "--data is required");
    Dataset ds = load_dataset(cfg);
    auto groups = build_groups(cfg, ds);
    CommandResult res;
    res.report = nlohmann::json::array();
    std::ostringstream t;
    for (const auto& g : groups) {
        nlohmann::json members = nlohmann::json::array();
        t << g.name << " (" << to_string(g.kind) << ", " << g.members.size() << "):";
        for (auto p : g.members) {
            members.push_back(ds.feature(p).name);
            t << ' ' << ds.feature(p).name;
            if (!ds.feature(p).splittable()) t << "[const]";
        }
        t << "\n";
        res.report.push_back({{"name", g.name}, {"kind", to_string(g.kind)}, {"members", members}});
    }
    res.text = t.str();
    return res;
}

}  // namespace ruleopt
