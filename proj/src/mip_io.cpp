#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "ruleopt/error.hpp"
#include "ruleopt/mip_model.hpp"

namespace ruleopt {

namespace {
constexpr const char* kModule = "mip_model";

std::string num(double v) {
    if (v == 0.0) return "0";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw Error(kModule, "number formatting failed");
    return std::string(buf, end);
}

bool is_discrete(const Variable& v) { return v.kind != VarKind::continuous; }

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(kModule, "cannot write '" + path + "'");
    return out;
}

void finish(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw Error(kModule, "write failed for '" + path + "'");
}

void write_terms(std::ostream& out, const MipModel& m, const std::vector<Term>& terms) {
    std::size_t on_line = 0;
    for (std::size_t j = 0; j < terms.size(); ++j) {
        const auto& t = terms[j];
        double c = t.coef;
        if (j > 0) out << (c < 0 ? " - " : " + ");
        else if (c < 0) out << "- ";
        double mag = std::abs(c);
        if (mag != 1.0) out << num(mag) << ' ';
        out << m.variables()[t.var].name;
        if (++on_line == 8 && j + 1 < terms.size()) {
            out << "\n   ";
            on_line = 0;
        }
    }
}

const char* sense_lp(RowSense s) {
    switch (s) {
        case RowSense::le: return "<=";
        case RowSense::ge: return ">=";
        case RowSense::eq: return "=";
    }
    return "=";
}

// Binaries declared in the Binaries section get [0,1] from some readers
// regardless of the Bounds section, so narrowed binaries go to Generals.
bool plain_binary(const Variable& v) { return v.kind == VarKind::binary && v.lb == 0.0 && v.ub == 1.0; }

}  // namespace

void write_lp(const MipModel& m, std::ostream& out) {
    const auto& meta = m.meta();
    out << "\\ ruleopt model: N=" << meta.n << " P=" << meta.p << " K=" << meta.k << " D=" << meta.depth
        << " w=" << num(meta.w) << "\n";
    out << "Maximize\n obj: ";
    write_terms(out, m, m.objective());
    out << "\nSubject To\n";
    for (const auto& r : m.rows()) {
        out << ' ' << r.name << ": ";
        write_terms(out, m, r.terms);
        out << ' ' << sense_lp(r.sense) << ' ' << num(r.rhs) << "\n";
    }
    out << "Bounds\n";
    for (const auto& v : m.variables()) {
        if (plain_binary(v)) continue;
        if (std::isinf(v.lb) && std::isinf(v.ub)) {
            out << ' ' << v.name << " free\n";
        } else if (std::isinf(v.ub)) {
            out << ' ' << v.name << " >= " << num(v.lb) << "\n";
        } else {
            out << ' ' << num(v.lb) << " <= " << v.name << " <= " << num(v.ub) << "\n";
        }
    }
    out << "Generals\n";
    for (const auto& v : m.variables())
        if (v.kind == VarKind::integer || (v.kind == VarKind::binary && !plain_binary(v)))
            out << ' ' << v.name << "\n";
    out << "Binaries\n";
    for (const auto& v : m.variables())
        if (plain_binary(v)) out << ' ' << v.name << "\n";
    out << "End\n";
}

void write_mps(const MipModel& m, std::ostream& out) {
    auto field = [](const std::string& s, std::size_t width) {
        std::string r = s;
        if (r.size() < width) r.append(width - r.size(), ' ');
        return r + ' ';
    };
    std::size_t wn = 8;
    for (const auto& v : m.variables()) wn = std::max(wn, v.name.size());
    std::size_t wr = 8;
    for (const auto& r : m.rows()) wr = std::max(wr, r.name.size());

    out << "NAME          ruleopt\n";
    out << "OBJSENSE\n    MAX\n";
    out << "ROWS\n";
    out << " N  obj\n";
    for (const auto& r : m.rows()) {
        const char* s = r.sense == RowSense::le ? "L" : r.sense == RowSense::ge ? "G" : "E";
        out << ' ' << s << "  " << r.name << "\n";
    }

    // Column-major view of the matrix.
    std::vector<std::vector<std::pair<std::size_t, double>>> cols(m.variables().size());
    for (const auto& t : m.objective()) cols[t.var].push_back({0, t.coef});
    for (std::size_t ri = 0; ri < m.rows().size(); ++ri)
        for (const auto& t : m.rows()[ri].terms) cols[t.var].push_back({ri + 1, t.coef});

    out << "COLUMNS\n";
    bool in_int = false;
    int marker = 0;
    for (std::size_t j = 0; j < m.variables().size(); ++j) {
        const auto& v = m.variables()[j];
        bool disc = is_discrete(v);
        if (disc != in_int) {
            out << "    " << field("MARKER" + std::to_string(marker++), wn) << field("'MARKER'", wr)
                << (disc ? "'INTORG'" : "'INTEND'") << "\n";
            in_int = disc;
        }
        if (cols[j].empty()) {
            out << "    " << field(v.name, wn) << field("obj", wr) << "0\n";
            continue;
        }
        for (const auto& [row, coef] : cols[j]) {
            const std::string& rn = row == 0 ? std::string("obj") : m.rows()[row - 1].name;
            out << "    " << field(v.name, wn) << field(rn, wr) << num(coef) << "\n";
        }
    }
    if (in_int)
        out << "    " << field("MARKER" + std::to_string(marker++), wn) << field("'MARKER'", wr)
            << "'INTEND'\n";

    out << "RHS\n";
    for (const auto& r : m.rows())
        if (r.rhs != 0.0) out << "    " << field("RHS", wn) << field(r.name, wr) << num(r.rhs) << "\n";

    out << "BOUNDS\n";
    for (const auto& v : m.variables()) {
        auto line = [&](const char* type, std::optional<double> val) {
            out << ' ' << type << " BND       " << field(v.name, wn);
            if (val) out << num(*val);
            out << "\n";
        };
        if (std::isinf(v.lb) && std::isinf(v.ub)) {
            line("FR", std::nullopt);
        } else if (v.lb == v.ub) {
            line("FX", v.lb);
        } else if (plain_binary(v)) {
            line("BV", std::nullopt);
        } else {
            line("LO", v.lb);
            if (std::isinf(v.ub))
                line("PL", std::nullopt);
            else
                line("UP", v.ub);
        }
    }
    out << "ENDATA\n";
}

void emit_lp(const MipModel& model, const std::string& path) {
    auto out = open_out(path);
    write_lp(model, out);
    finish(out, path);
}

void emit_mps(const MipModel& model, const std::string& path) {
    auto out = open_out(path);
    write_mps(model, out);
    finish(out, path);
}

Assignment warmstart_assignment(const MipModel& m, const Rule& rule, const Dataset& ds) {
    const auto& fx = m.fixings();
    const auto& meta = m.meta();
    if (static_cast<long>(ds.num_samples()) != meta.n || static_cast<long>(ds.num_features()) != meta.p)
        throw Error(kModule, "dataset does not match the model");
    TreeShape shape(meta.depth);
    if (!fx.is_target(rule.leaf))
        throw Error(kModule, "rule leaf " + std::to_string(rule.leaf) + " is not a target leaf");
    auto paths = target_paths(fx, shape);
    const auto& path = *std::find_if(paths.begin(), paths.end(),
                                     [&](const TargetPath& p) { return p.leaf == rule.leaf; });
    if (path.structurally_empty != rule.never_fires || rule.conditions.size() != path.steps.size())
        throw Error(kModule, "rule does not match the split structure of leaf " + std::to_string(rule.leaf));

    // Per branch node: feature and threshold, or none when unsplit.
    const int nb = shape.num_branch();
    std::vector<std::optional<std::size_t>> feat(nb + 1);
    std::vector<double> thr(nb + 1, 0.0);
    for (int t = 1; t <= nb; ++t) {
        const auto& nf = fx.node(t);
        if (!nf.split) continue;
        feat[t] = nf.allowed.front();
        thr[t] = nf.fixed_threshold.value_or(0.0);
    }
    for (std::size_t j = 0; j < path.steps.size(); ++j) {
        const auto& step = path.steps[j];
        const auto& c = rule.conditions[j];
        const auto& nf = fx.node(step.node);
        if (c.direction != step.direction)
            throw Error(kModule, "condition " + std::to_string(j) + " has the wrong direction");
        if (!std::binary_search(nf.allowed.begin(), nf.allowed.end(), c.feature))
            throw Error(kModule, "condition " + std::to_string(j) + " uses a feature outside its group");
        if (nf.fixed_threshold && c.threshold != *nf.fixed_threshold)
            throw Error(kModule, "condition " + std::to_string(j) + " must use the fixed threshold");
        feat[step.node] = c.feature;
        thr[step.node] = c.threshold;
    }

    Assignment x(m.variables().size(), 0.0);
    auto set = [&](const std::string& name, double v) { x[m.index(name)] = v; };
    for (int t = 1; t <= nb; ++t) {
        set("d_t" + std::to_string(t), feat[t] ? 1.0 : 0.0);
        set("b_t" + std::to_string(t), thr[t]);
        if (feat[t]) set("a_p" + std::to_string(*feat[t]) + "_t" + std::to_string(t), 1.0);
    }

    const std::size_t K = ds.num_labels();
    const int first = shape.first_leaf();
    std::vector<std::vector<long>> counts(shape.num_leaves(), std::vector<long>(K, 0));
    for (std::size_t i = 0; i < ds.num_samples(); ++i) {
        int t = 1;
        while (t < first) {
            if (!feat[t]) {
                t = 2 * t + 1;
                continue;
            }
            std::size_t p = *feat[t];
            double v = ds.value(i, p);
            if (v + ds.epsilon(p) <= thr[t] + kSplitTolerance)
                t = 2 * t;
            else if (v >= thr[t] - kSplitTolerance)
                t = 2 * t + 1;
            else
                throw Error(kModule, "threshold at node " + std::to_string(t) +
                                         " leaves sample " + std::to_string(i) + " on neither side");
        }
        set("z_i" + std::to_string(i) + "_t" + std::to_string(t), 1.0);
        ++counts[t - first][ds.label(i)];
    }

    std::vector<bool> active(shape.num_leaves(), false);
    for (int t = 1; t <= nb; ++t)
        if (feat[t])
            for (int s : rightmost_pair(t, shape)) active[s - first] = true;
    double best = -std::numeric_limits<double>::infinity();
    int best_leaf = 0;
    for (int t : shape.leaves()) {
        const auto& cnt = counts[t - first];
        long nt = 0;
        for (long v : cnt) nt += v;
        if (nt > 0) active[t - first] = true;
        set("l_t" + std::to_string(t), active[t - first] ? 1.0 : 0.0);
        set("N_t" + std::to_string(t), static_cast<double>(nt));
        for (std::size_t k = 0; k < K; ++k)
            set("N_k" + std::to_string(k) + "_t" + std::to_string(t), static_cast<double>(cnt[k]));
        auto vr = vi_index(cnt, meta.w);
        if (active[t - first]) set("c_k" + std::to_string(vr.label) + "_t" + std::to_string(t), 1.0);
        if (fx.is_target(t)) {
            set("L_t" + std::to_string(t), static_cast<double>(vr.misclassified));
            if (vr.vi > best || (vr.vi == best && t == rule.leaf)) {
                best = vr.vi;
                best_leaf = t;
            }
        }
    }
    set("q_t" + std::to_string(best_leaf), 1.0);
    set("I_max", best);
    return x;
}

void write_assignment(const MipModel& m, const Assignment& values, std::ostream& out) {
    if (values.size() != m.variables().size()) throw Error(kModule, "assignment size mismatch");
    for (std::size_t j = 0; j < values.size(); ++j) out << m.variables()[j].name << ' ' << num(values[j]) << "\n";
}

void emit_warmstart(const MipModel& model, const Rule& rule, const Dataset& ds, const std::string& path) {
    auto x = warmstart_assignment(model, rule, ds);
    auto out = open_out(path);
    write_assignment(model, x, out);
    finish(out, path);
}

void write_priorities(const MipModel& m, std::ostream& out) {
    for (const auto& v : m.variables()) {
        if (!is_discrete(v)) continue;
        int pr = (v.family == "a" || v.family == "d") ? 10 : 1;
        out << v.name << ' ' << pr << "\n";
    }
}

void emit_priorities(const MipModel& model, const std::string& path) {
    auto out = open_out(path);
    write_priorities(model, out);
    finish(out, path);
}

FeasibilityReport check_feasibility(const MipModel& m, const Assignment& x, double tol) {
    if (x.size() != m.variables().size()) throw Error(kModule, "assignment size mismatch");
    FeasibilityReport rep;
    auto flag = [&](const std::string& what, double viol) {
        rep.max_violation = std::max(rep.max_violation, viol);
        if (viol > tol) {
            rep.feasible = false;
            if (rep.violations.size() < 20) rep.violations.push_back(what + " (" + num(viol) + ")");
        }
    };
    for (std::size_t j = 0; j < x.size(); ++j) {
        const auto& v = m.variables()[j];
        if (!std::isfinite(x[j])) {
            flag(v.name + " is not finite", std::numeric_limits<double>::infinity());
            continue;
        }
        flag(v.name + " below lower bound", v.lb - x[j]);
        flag(v.name + " above upper bound", x[j] - v.ub);
        if (is_discrete(v)) flag(v.name + " not integral", std::abs(x[j] - std::round(x[j])));
    }
    for (const auto& r : m.rows()) {
        double lhs = 0.0;
        for (const auto& t : r.terms) lhs += t.coef * x[t.var];
        double viol = r.sense == RowSense::le   ? lhs - r.rhs
                      : r.sense == RowSense::ge ? r.rhs - lhs
                                                : std::abs(lhs - r.rhs);
        flag("row " + r.name, viol);
    }
    return rep;
}

Assignment assignment_from_map(const MipModel& m, const std::map<std::string, double>& values) {
    Assignment x(m.variables().size(), 0.0);
    for (std::size_t j = 0; j < x.size(); ++j) {
        auto it = values.find(m.variables()[j].name);
        if (it == values.end()) throw Error(kModule, "assignment lacks '" + m.variables()[j].name + "'");
        x[j] = it->second;
    }
    return x;
}

Assignment read_assignment(const MipModel& m, std::istream& in) {
    std::map<std::string, double> values;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string name;
        double v = 0.0;
        if (!(ss >> name) || name[0] == '#') continue;
        if (!(ss >> v)) throw Error(kModule, "bad assignment line '" + line + "'");
        values[name] = v;
    }
    return assignment_from_map(m, values);
}

ExtractedRule solution_to_rule(const MipModel& m, const Dataset& ds, const Assignment& x) {
    constexpr double kIntTol = 1e-6;
    if (x.size() != m.variables().size()) throw Error(kModule, "assignment size mismatch");
    for (std::size_t j = 0; j < x.size(); ++j) {
        const auto& v = m.variables()[j];
        if (v.kind == VarKind::binary && std::abs(x[j] - std::round(x[j])) > kIntTol)
            throw Error(kModule, "binary '" + v.name + "' is fractional (" + num(x[j]) + ")");
    }
    auto val = [&](const std::string& name) { return x[m.index(name)]; };
    auto on = [&](const std::string& name) { return val(name) > 0.5; };

    const auto& meta = m.meta();
    int leaf = 0;
    for (int t : meta.targets) {
        if (on("q_t" + std::to_string(t))) {
            if (leaf != 0) throw Error(kModule, "more than one q_t is set");
            leaf = t;
        }
    }
    if (leaf == 0) throw Error(kModule, "no target leaf has q_t = 1");

    Rule rule;
    rule.provenance = Provenance::external;
    rule.leaf = leaf;
    std::vector<int> chain;
    for (int child = leaf; child > 1; child /= 2) chain.push_back(child);
    std::reverse(chain.begin(), chain.end());
    for (int child : chain) {
        int s = child / 2;
        bool left = child % 2 == 0;
        if (!on("d_t" + std::to_string(s))) {
            if (left) rule.never_fires = true;
            continue;
        }
        std::optional<std::size_t> feature;
        for (long p = 0; p < meta.p; ++p)
            if (on("a_p" + std::to_string(p) + "_t" + std::to_string(s))) feature = static_cast<std::size_t>(p);
        if (!feature) throw Error(kModule, "split node " + std::to_string(s) + " selects no feature");
        Condition c;
        c.feature = *feature;
        c.direction = left ? Direction::below : Direction::at_or_above;
        c.threshold = val("b_t" + std::to_string(s));
        c.epsilon = ds.epsilon(*feature);
        rule.conditions.push_back(c);
    }
    if (rule.never_fires) rule.conditions.clear();
    for (long k = 0; k < meta.k; ++k)
        if (on("c_k" + std::to_string(k) + "_t" + std::to_string(leaf))) rule.label = static_cast<int>(k);
    return {rule, val("I_max")};
}

}  // namespace ruleopt
