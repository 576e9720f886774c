#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "ruleopt/app.hpp"
#include "ruleopt/error.hpp"
#include "ruleopt/mip_model.hpp"

using namespace ruleopt;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("ruleopt_app_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig planted_config(const std::string& name, int rows = 300) {
    auto dir = scratch(name);
    std::ofstream(dir / "data.csv") << fixtures::planted_csv(rows, 21);
    RunConfig cfg;
    cfg.data = (dir / "data.csv").string();
    cfg.target = "label";
    cfg.out = (dir / "out").string();
    return cfg;
}

RunConfig sensitivity_config(const std::string& name) {
    RunConfig cfg;
    cfg.data = std::string(RULEOPT_SOURCE_DIR) + "/tests/data/sensitivity.csv";
    cfg.target = "outcome";
    cfg.depth = 1;
    cfg.holdout = false;
    cfg.out = scratch(name).string();
    return cfg;
}

}  // namespace

TEST_CASE("config validation") {
    RunConfig cfg;
    cfg.data = "x.csv";
    CHECK_NOTHROW(cfg.validate());
    cfg.weight = 1.0;
    CHECK_NOTHROW(cfg.validate());
    cfg.weight = 0.5;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.weight = 10;
    cfg.ratio = 1.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.ratio = 0.8;
    cfg.depth = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("non-numeric columns are treated as categorical") {
    auto cfg = planted_config("infer");
    auto ds = load_dataset(cfg);
    CHECK(ds.find_feature("color=red").has_value());
    CHECK(ds.find_feature("age").has_value());
    CHECK(ds.num_labels() == 2);
}

TEST_CASE("structure resolution") {
    RunConfig cfg;
    CHECK(resolve_structure(cfg).depth == 2);
    cfg.structure = "cat-num-all";
    CHECK(resolve_structure(cfg).depth == 3);
    cfg.depth = 2;
    CHECK_THROWS_AS(resolve_structure(cfg), Error);
}

TEST_CASE("fit recovers the planted rule") {
    auto cfg = planted_config("fit");
    cfg.holdout = false;
    auto res = cmd_fit(cfg);
    CHECK(res.report["status"] == "optimal");
    auto ds = load_dataset(cfg);
    long positives = 0;
    for (std::size_t i = 0; i < ds.num_samples(); ++i) positives += ds.label(i) == *ds.find_label("yes");
    CHECK(res.report["i_max"].get<double>() == positives);
    CHECK(res.report["train"]["fired"].get<long>() == positives);
    CHECK(res.report["train"]["precision"].get<double>() == 1.0);
    auto text = res.report["rule"]["text"].get<std::string>();
    CHECK(text.find("color == red") != std::string::npos);
    CHECK(text.find("age >= ") != std::string::npos);
    CHECK(fs::exists(fs::path(cfg.out) / "rule.json"));
    CHECK(fs::exists(fs::path(cfg.out) / "trace.csv"));
    CHECK(slurp(fs::path(cfg.out) / "trace.csv").rfind("step,vi,seconds\n", 0) == 0);
}

TEST_CASE("fit with a tiny time limit stops early") {
    auto cfg = planted_config("limit", 20000);
    cfg.time_limit = 0.001;
    auto res = cmd_fit(cfg);
    CHECK(res.report["status"] == "time_limit");
    CHECK(res.report["i_max"].get<double>() <= res.report["upper_bound"].get<double>());
    CHECK(res.report["rule"].contains("conditions"));
}

TEST_CASE("warmstart does not change the optimum") {
    auto cfg = planted_config("warm");
    cfg.out.clear();
    auto on = cmd_fit(cfg);
    cfg.warmstart = false;
    cfg.priorities = false;
    auto off = cmd_fit(cfg);
    CHECK(on.report["status"] == "optimal");
    CHECK(off.report["status"] == "optimal");
    CHECK(on.report["i_max"] == off.report["i_max"]);
    CHECK(on.report["rule"]["text"] == off.report["rule"]["text"]);
}

TEST_CASE("sweep over weights on the sensitivity fixture") {
    auto cfg = sensitivity_config("sweep");
    std::vector<double> ws{10, 9, 8, 7, 6, 5, 4, 3, 2, 1};
    auto res = cmd_sweep(cfg, ws);
    const auto& rows = res.report["rows"];
    REQUIRE(rows.size() == ws.size());
    auto ratio = [](const nlohmann::json& s) {
        return format_ratio(s["correct"].get<long>(), s["fired"].get<long>());
    };
    CHECK(ratio(rows[0]["train"]) == "1.000 (38/38)");
    CHECK(rows[0]["i_max"].get<double>() == 38);
    CHECK(ratio(rows[2]["train"]) == "0.978 (45/46)");
    CHECK(rows[2]["i_max"].get<double>() == 38);
    CHECK(ratio(rows[8]["train"]) == "0.898 (53/59)");
    CHECK(rows[8]["i_max"].get<double>() == 47);
    // Larger w never raises I_max.
    for (std::size_t i = 1; i < rows.size(); ++i)
        CHECK(rows[i - 1]["i_max"].get<double>() <= rows[i]["i_max"].get<double>());
    CHECK(fs::exists(fs::path(cfg.out) / "sweep.json"));

    CHECK_THROWS_AS(cmd_sweep(cfg, {10, 0.5}), Error);
}

TEST_CASE("eval on a saved rule") {
    auto cfg = sensitivity_config("eval");
    cmd_fit(cfg);
    auto rule_file = (fs::path(cfg.out) / "rule.json").string();
    auto res = cmd_eval(cfg, rule_file);
    CHECK(res.text.find("1.000 (38/38)") != std::string::npos);
    CHECK(res.text.find("0.594 (38/64)") != std::string::npos);
    CHECK(res.report["stats"]["vi"].get<double>() == 38);

    auto j = nlohmann::json::parse(slurp(rule_file));
    j["conditions"][0]["threshold"] = 1000.0;
    std::ofstream(fs::path(cfg.out) / "never.json") << j.dump();
    auto never = cmd_eval(cfg, (fs::path(cfg.out) / "never.json").string());
    CHECK(never.report["stats"]["coverage"].get<double>() == 0.0);
    CHECK(never.report["stats"]["zero_fired"].get<bool>());

    j["conditions"][0]["feature"] = "height";
    std::ofstream(fs::path(cfg.out) / "stale.json") << j.dump();
    CHECK_THROWS_WITH_AS(cmd_eval(cfg, (fs::path(cfg.out) / "stale.json").string()),
                         doctest::Contains("unknown feature"), Error);
}

TEST_CASE("bench with one split has zero spread") {
    auto cfg = planted_config("bench1");
    cfg.splits = 1;
    auto res = cmd_bench(cfg, {"opdt"});
    const auto& a = res.report["aggregates"]["opdt"];
    CHECK(a["train_vi"]["std"].get<double>() == 0.0);
    CHECK(a["test_vi"]["std"].get<double>() == 0.0);
    CHECK(a["train_vi"]["n"].get<int>() == 1);
}

TEST_CASE("bench aggregates, dominance and determinism") {
    auto cfg = planted_config("bench3");
    cfg.splits = 3;
    cfg.seed = 5;
    std::vector<std::string> methods{"opdt", "bsccart", "rscrules"};
    auto a = cmd_bench(cfg, methods);
    auto first = slurp(fs::path(cfg.out) / "bench.json");
    auto b = cmd_bench(cfg, methods);
    CHECK(mask_timing(a.report).dump() == mask_timing(b.report).dump());
    CHECK(a.report["schema"] == "ruleopt.bench/1");
    CHECK(a.report.contains("timing"));
    CHECK_FALSE(mask_timing(a.report).contains("timing"));
    CHECK(nlohmann::json::parse(first)["rows"] == a.report["rows"]);

    CHECK(aggregate_rows(a.report["rows"], methods) == a.report["aggregates"]);
    const auto& agg = a.report["aggregates"];
    CHECK(agg["opdt"]["train_vi"]["mean"].get<double>() >= agg["bsccart"]["train_vi"]["mean"].get<double>());
    CHECK(agg["opdt"]["train_vi"]["mean"].get<double>() >= agg["rscrules"]["train_vi"]["mean"].get<double>());
    for (const auto& r : a.report["rows"]) CHECK(r["ok"].get<bool>());
}

TEST_CASE("bench records failures without aborting") {
    auto cfg = planted_config("bench_fail");
    cfg.splits = 2;
    cfg.structure = "nope";
    auto res = cmd_bench(cfg, {"opdt", "bsccart"});
    REQUIRE(res.report["rows"].size() == 4);
    for (const auto& r : res.report["rows"]) {
        CHECK_FALSE(r["ok"].get<bool>());
        CHECK(r["error"].get<std::string>().find("nope") != std::string::npos);
    }
    CHECK_THROWS_AS(cmd_bench(cfg, {"cart"}), Error);
}

TEST_CASE("emit writes stable files with a feasible warmstart") {
    auto cfg = planted_config("emit", 60);
    cfg.depth = 1;
    for (std::string fmt : {"lp", "mps"}) {
        cmd_emit(cfg, fmt, true, true);
        auto model = slurp(fs::path(cfg.out) / ("model." + fmt));
        auto start = slurp(fs::path(cfg.out) / "model.start");
        auto prio = slurp(fs::path(cfg.out) / "model.prio");
        cmd_emit(cfg, fmt, true, true);
        CHECK(model == slurp(fs::path(cfg.out) / ("model." + fmt)));
        CHECK(start == slurp(fs::path(cfg.out) / "model.start"));
        CHECK(prio == slurp(fs::path(cfg.out) / "model.prio"));
    }

    auto ds = load_dataset(cfg);
    auto pb = prepare(cfg, ds, cfg.seed);
    auto model = build(pb.train, pb.shape(), pb.fixings, cfg.weight);
    std::ifstream in(fs::path(cfg.out) / "model.start");
    auto x = read_assignment(model, in);
    auto rep = check_feasibility(model, x);
    CHECK(rep.feasible);
    CHECK(rep.max_violation <= 1e-9);

    CHECK_THROWS_WITH_AS(cmd_emit(cfg, "gms", true, true), doctest::Contains("format"), Error);
}

TEST_CASE("groups command") {
    auto cfg = planted_config("groups");
    auto res = cmd_groups(cfg);
    CHECK(res.text.find("all (all, 6)") != std::string::npos);
    CHECK(res.text.find("num (numerical, 3)") != std::string::npos);
    CHECK(res.text.find("cat (categorical, 3)") != std::string::npos);
}
