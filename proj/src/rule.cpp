#include "ruleopt/rule.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ruleopt/error.hpp"

namespace ruleopt {

namespace {
constexpr const char* kModule = "rules";
constexpr const char* kRuleFormat = "ruleopt.rule/1";

std::string number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}
}  // namespace

const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::exact: return "exact";
        case Provenance::bsccart: return "bsccart";
        case Provenance::rscrules: return "rscrules";
        case Provenance::external: return "external";
    }
    return "external";
}

Provenance provenance_from_string(const std::string& s) {
    if (s == "exact") return Provenance::exact;
    if (s == "bsccart") return Provenance::bsccart;
    if (s == "rscrules") return Provenance::rscrules;
    return Provenance::external;
}

bool Rule::fires(std::span<const double> sample) const {
    if (never_fires) return false;
    return std::all_of(conditions.begin(), conditions.end(),
                       [&](const Condition& c) { return c.fires(sample[c.feature]); });
}

void check_weight(double w) {
    if (!(w >= 1.0) || !std::isfinite(w)) throw Error(kModule, "weight w must be >= 1");
}

ViResult vi_index(std::span<const long> counts, double w) {
    check_weight(w);
    ViResult r;
    long n = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (counts[k] < 0) throw Error(kModule, "negative label count");
        n += counts[k];
        if (counts[k] > r.majority) {
            r.majority = counts[k];
            r.label = static_cast<int>(k);
        }
    }
    r.misclassified = n - r.majority;
    r.vi = vi_value(n, r.majority, w);
    return r;
}

RuleStats evaluate(const Rule& rule, const Dataset& ds, double w) {
    check_weight(w);
    for (const auto& c : rule.conditions)
        if (c.feature >= ds.num_features()) throw Error(kModule, "rule references a missing feature");
    RuleStats s;
    s.total = static_cast<long>(ds.num_samples());
    s.per_label.assign(ds.num_labels(), 0);
    for (std::size_t i = 0; i < ds.num_samples(); ++i) {
        if (rule.fires(ds.row(i))) {
            ++s.fired;
            ++s.per_label[ds.label(i)];
        }
    }
    if (rule.label) {
        if (*rule.label < 0 || static_cast<std::size_t>(*rule.label) >= ds.num_labels())
            throw Error(kModule, "rule label out of range");
        s.label = *rule.label;
        s.correct = s.per_label[s.label];
        s.misclassified = s.fired - s.correct;
        s.vi = vi_value(s.fired, s.correct, w);
    } else {
        auto r = vi_index(s.per_label, w);
        s.label = r.label;
        s.correct = r.majority;
        s.misclassified = r.misclassified;
        s.vi = r.vi;
    }
    s.zero_fired = s.fired == 0;
    s.precision = s.fired > 0 ? static_cast<double>(s.correct) / static_cast<double>(s.fired) : 1.0;
    s.coverage = s.total > 0 ? static_cast<double>(s.fired) / static_cast<double>(s.total) : 0.0;
    return s;
}

std::string format_ratio(long num, long den) {
    char buf[96];
    double v = den > 0 ? static_cast<double>(num) / static_cast<double>(den) : 1.0;
    std::snprintf(buf, sizeof buf, "%.3f (%ld/%ld)", v, num, den);
    return buf;
}

std::string describe(const Rule& rule, const Dataset& ds) {
    std::ostringstream out;
    if (rule.never_fires) {
        out << "(empty leaf)";
    } else if (rule.conditions.empty()) {
        out << "TRUE";
    }
    for (std::size_t i = 0; i < rule.conditions.size() && !rule.never_fires; ++i) {
        const auto& c = rule.conditions[i];
        const auto& f = ds.feature(c.feature);
        if (i) out << " AND ";
        bool below = c.direction == Direction::below;
        if (f.kind == FeatureKind::onehot && c.threshold > 0.0 && c.threshold <= 1.0) {
            out << f.source_column << (below ? " != " : " == ") << f.category;
        } else {
            out << f.name << (below ? " < " : " >= ") << number(f.denormalize(c.threshold));
        }
    }
    if (rule.label) out << " => " << ds.label_names()[*rule.label];
    return out.str();
}

nlohmann::json stats_to_json(const RuleStats& s, const Dataset& ds) {
    nlohmann::json counts = nlohmann::json::object();
    for (std::size_t k = 0; k < s.per_label.size(); ++k) counts[ds.label_names()[k]] = s.per_label[k];
    return {{"fired", s.fired},
            {"total", s.total},
            {"label", ds.label_names()[s.label]},
            {"correct", s.correct},
            {"misclassified", s.misclassified},
            {"vi", s.vi},
            {"precision", s.precision},
            {"coverage", s.coverage},
            {"zero_fired", s.zero_fired},
            {"per_label", counts}};
}

nlohmann::json rule_to_json(const Rule& rule, const Dataset& ds, const std::optional<RuleStats>& stats) {
    nlohmann::json conds = nlohmann::json::array();
    for (const auto& c : rule.conditions) {
        const auto& f = ds.feature(c.feature);
        double range = f.max - f.min;
        conds.push_back({{"feature", f.name},
                         {"column", f.source_column},
                         {"comparator", c.direction == Direction::below ? "<" : ">="},
                         {"threshold", f.denormalize(c.threshold)},
                         {"epsilon", range > 0.0 ? c.epsilon * range : c.epsilon},
                         {"threshold_normalized", c.threshold},
                         {"epsilon_normalized", c.epsilon}});
    }
    nlohmann::json j{{"format", kRuleFormat},
                     {"provenance", to_string(rule.provenance)},
                     {"leaf", rule.leaf},
                     {"never_fires", rule.never_fires},
                     {"conditions", conds},
                     {"text", describe(rule, ds)}};
    j["predicted_label"] = rule.label ? nlohmann::json(ds.label_names()[*rule.label]) : nlohmann::json();
    if (stats) j["stats"] = stats_to_json(*stats, ds);
    return j;
}

Rule rule_from_json(const nlohmann::json& j, const Dataset& ds) {
    try {
        if (j.value("format", std::string()) != kRuleFormat)
            throw Error(kModule, "not a rule file (missing format tag)");
        Rule r;
        r.provenance = provenance_from_string(j.value("provenance", std::string("external")));
        r.leaf = j.value("leaf", 0);
        r.never_fires = j.value("never_fires", false);
        for (const auto& c : j.at("conditions")) {
            auto name = c.at("feature").get<std::string>();
            auto p = ds.find_feature(name);
            if (!p) throw Error(kModule, "rule references unknown feature '" + name + "'");
            const auto& f = ds.feature(*p);
            double range = f.max - f.min;
            Condition cond;
            cond.feature = *p;
            auto cmp = c.at("comparator").get<std::string>();
            if (cmp == "<")
                cond.direction = Direction::below;
            else if (cmp == ">=")
                cond.direction = Direction::at_or_above;
            else
                throw Error(kModule, "unknown comparator '" + cmp + "'");
            cond.threshold = f.normalize(c.at("threshold").get<double>());
            double eps = c.at("epsilon").get<double>();
            cond.epsilon = range > 0.0 ? eps / range : eps;
            r.conditions.push_back(cond);
        }
        if (j.contains("predicted_label") && !j["predicted_label"].is_null()) {
            auto name = j["predicted_label"].get<std::string>();
            auto k = ds.find_label(name);
            if (!k) throw Error(kModule, "rule predicts unknown label '" + name + "'");
            r.label = *k;
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(kModule, std::string("malformed rule: ") + e.what());
    }
}

void save_rule(const std::string& path, const Rule& rule, const Dataset& ds,
               const std::optional<RuleStats>& stats) {
    std::ofstream out(path);
    if (!out) throw Error(kModule, "cannot write rule file '" + path + "'");
    out << rule_to_json(rule, ds, stats).dump(2) << "\n";
}

Rule load_rule(const std::string& path, const Dataset& ds) {
    std::ifstream in(path);
    if (!in) throw Error(kModule, "cannot open rule file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(kModule, std::string("cannot parse rule file: ") + e.what());
    }
    return rule_from_json(j, ds);
}

}  // namespace ruleopt
