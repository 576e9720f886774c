#include "ruleopt/mip_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ruleopt/error.hpp"

namespace ruleopt {

namespace {
constexpr const char* kModule = "mip_model";
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string t_name(const char* prefix, int t) { return std::string(prefix) + "_t" + std::to_string(t); }

std::string pt_name(const char* prefix, char idx, std::size_t p, int t) {
    return std::string(prefix) + "_" + idx + std::to_string(p) + "_t" + std::to_string(t);
}
}  // namespace

std::optional<std::size_t> MipModel::find(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
}

std::size_t MipModel::index(const std::string& name) const {
    auto v = find(name);
    if (!v) throw Error(kModule, "no variable named '" + name + "'");
    return *v;
}

std::size_t MipModel::add_var(std::string name, std::string family, VarKind kind, double lb, double ub) {
    std::size_t idx = vars_.size();
    by_name_.emplace(name, idx);
    vars_.push_back({std::move(name), std::move(family), kind, lb, ub});
    return idx;
}

void MipModel::add_row(std::string name, std::string family, std::vector<Term> terms, RowSense sense,
                       double rhs) {
    rows_.push_back({std::move(name), std::move(family), std::move(terms), sense, rhs});
}

MipModel build(const Dataset& ds, const TreeShape& shape, const BscFixings& fixings, double w) {
    check_weight(w);
    if (fixings.depth != shape.depth()) throw Error(kModule, "fixings do not match the tree depth");
    if (ds.num_samples() == 0) throw Error(kModule, "empty dataset");

    MipModel m;
    const std::size_t n = ds.num_samples(), P = ds.num_features(), K = ds.num_labels();
    const auto branches = shape.branch_nodes();
    const auto leaves = shape.leaves();
    const auto& targets = fixings.targets;

    auto& meta = m.meta_;
    meta.n = static_cast<long>(n);
    meta.p = static_cast<long>(P);
    meta.k = static_cast<long>(K);
    meta.depth = shape.depth();
    meta.w = w;
    meta.epsilon = ds.epsilons();
    meta.epsilon_max = ds.epsilon_max();
    meta.big_m_loss = static_cast<double>(n);
    meta.big_m_vi = w * static_cast<double>(n);
    meta.targets = targets;
    m.fixings_ = fixings;

    // Variables, with the structure fixings realized as bounds.
    std::map<std::pair<std::size_t, int>, std::size_t> a;
    std::map<int, std::size_t> b, d, l, Nt, Lt, q;
    std::map<std::pair<std::size_t, int>, std::size_t> z, c, Nkt;
    for (int t : branches) {
        const auto& nf = fixings.node(t);
        for (std::size_t p = 0; p < P; ++p) {
            bool free = nf.split && std::binary_search(nf.allowed.begin(), nf.allowed.end(), p);
            a[{p, t}] = m.add_var(pt_name("a", 'p', p, t), "a", VarKind::binary, 0.0, free ? 1.0 : 0.0);
        }
    }
    for (int t : branches) {
        const auto& nf = fixings.node(t);
        double lo = 0.0, hi = nf.split ? 1.0 : 0.0;
        if (nf.fixed_threshold) lo = hi = *nf.fixed_threshold;
        b[t] = m.add_var(t_name("b", t), "b", VarKind::continuous, lo, hi);
    }
    for (int t : branches) {
        double v = fixings.node(t).split ? 1.0 : 0.0;
        d[t] = m.add_var(t_name("d", t), "d", VarKind::binary, v, v);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (int t : leaves) z[{i, t}] = m.add_var(pt_name("z", 'i', i, t), "z", VarKind::binary, 0.0, 1.0);
    for (int t : leaves) l[t] = m.add_var(t_name("l", t), "l", VarKind::binary, 0.0, 1.0);
    for (std::size_t k = 0; k < K; ++k)
        for (int t : leaves) c[{k, t}] = m.add_var(pt_name("c", 'k', k, t), "c", VarKind::binary, 0.0, 1.0);
    for (int t : leaves) Nt[t] = m.add_var(t_name("N", t), "N", VarKind::integer, 0.0, kInf);
    for (std::size_t k = 0; k < K; ++k)
        for (int t : leaves) Nkt[{k, t}] = m.add_var(pt_name("N", 'k', k, t), "Nk", VarKind::integer, 0.0, kInf);
    for (int t : targets) Lt[t] = m.add_var(t_name("L", t), "L", VarKind::integer, 0.0, kInf);
    for (int t : targets) q[t] = m.add_var(t_name("q", t), "q", VarKind::binary, 0.0, 1.0);
    const std::size_t imax = m.add_var("I_max", "I_max", VarKind::continuous, -kInf, kInf);
    m.objective_ = {{imax, 1.0}};

    for (int t : branches) {
        std::vector<Term> terms;
        for (std::size_t p = 0; p < P; ++p) terms.push_back({a[{p, t}], 1.0});
        terms.push_back({d[t], -1.0});
        m.add_row(t_name("split_on", t), "split_on", std::move(terms), RowSense::eq, 0.0);
    }
    for (int t : branches)
        if (t > 1)
            m.add_row(t_name("tree", t), "tree", {{d[t], 1.0}, {d[t / 2], -1.0}}, RowSense::le, 0.0);
    for (int t : branches)
        for (int s : left_descendant_leaves(t, shape))
            m.add_row("left_off_t" + std::to_string(t) + "_s" + std::to_string(s), "left_off",
                      {{l[s], 1.0}, {d[t], -1.0}}, RowSense::le, 0.0);
    for (int t : branches)
        for (int s : rightmost_pair(t, shape))
            m.add_row("rightmost_on_t" + std::to_string(t) + "_s" + std::to_string(s), "rightmost_on",
                      {{l[s], 1.0}, {d[t], -1.0}}, RowSense::ge, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (int t : leaves)
            m.add_row(pt_name("leaf_on", 'i', i, t), "leaf_on", {{z[{i, t}], 1.0}, {l[t], -1.0}},
                      RowSense::le, 0.0);
    for (int t : leaves) {
        std::vector<Term> terms{{Nt[t], 1.0}};
        for (std::size_t i = 0; i < n; ++i) terms.push_back({z[{i, t}], -1.0});
        m.add_row(t_name("count", t), "count", std::move(terms), RowSense::eq, 0.0);
    }
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<Term> terms;
        for (int t : leaves) terms.push_back({z[{i, t}], 1.0});
        m.add_row("assign_i" + std::to_string(i), "assign", std::move(terms), RowSense::eq, 1.0);
    }

    const double eps_max = ds.epsilon_max();
    const double big = 1.0 + eps_max;
    for (std::size_t i = 0; i < n; ++i) {
        for (int t : leaves) {
            auto anc = ancestors_lr(t, shape);
            for (int s : anc.left) {
                std::vector<Term> terms;
                for (std::size_t p = 0; p < P; ++p) {
                    double coef = ds.value(i, p) + ds.epsilon(p);
                    if (coef != 0.0) terms.push_back({a[{p, s}], coef});
                }
                terms.push_back({b[s], -1.0});
                terms.push_back({z[{i, t}], big});
                m.add_row("left_i" + std::to_string(i) + "_t" + std::to_string(t) + "_s" + std::to_string(s),
                          "left", std::move(terms), RowSense::le, big);
            }
            for (int s : anc.right) {
                std::vector<Term> terms;
                for (std::size_t p = 0; p < P; ++p) {
                    double coef = ds.value(i, p);
                    if (coef != 0.0) terms.push_back({a[{p, s}], coef});
                }
                terms.push_back({b[s], -1.0});
                terms.push_back({z[{i, t}], -1.0});
                m.add_row("right_i" + std::to_string(i) + "_t" + std::to_string(t) + "_s" + std::to_string(s),
                          "right", std::move(terms), RowSense::ge, -1.0);
            }
        }
    }
    for (int t : leaves) {
        std::vector<Term> terms;
        for (std::size_t k = 0; k < K; ++k) terms.push_back({c[{k, t}], 1.0});
        terms.push_back({l[t], -1.0});
        m.add_row(t_name("predict", t), "predict", std::move(terms), RowSense::eq, 0.0);
    }
    for (std::size_t k = 0; k < K; ++k) {
        for (int t : leaves) {
            std::vector<Term> terms{{Nkt[{k, t}], 1.0}};
            for (std::size_t i = 0; i < n; ++i)
                if (static_cast<std::size_t>(ds.label(i)) == k) terms.push_back({z[{i, t}], -1.0});
            m.add_row(pt_name("count", 'k', k, t), "count_k", std::move(terms), RowSense::eq, 0.0);
        }
    }
    const double M = meta.big_m_loss;
    for (std::size_t k = 0; k < K; ++k) {
        for (int t : targets) {
            std::vector<Term> terms{{Lt[t], 1.0}, {Nt[t], -1.0}, {Nkt[{k, t}], 1.0}, {c[{k, t}], -M}};
            m.add_row(pt_name("loss_ge", 'k', k, t), "loss_ge", terms, RowSense::ge, -M);
            m.add_row(pt_name("loss_le", 'k', k, t), "loss_le", std::move(terms), RowSense::le, 0.0);
        }
    }
    const double Mv = meta.big_m_vi;
    for (int t : targets)
        m.add_row(t_name("vi_ge", t), "vi_ge", {{imax, 1.0}, {Nt[t], -1.0}, {Lt[t], w}}, RowSense::ge, 0.0);
    for (int t : targets)
        m.add_row(t_name("vi_le", t), "vi_le", {{imax, 1.0}, {Nt[t], -1.0}, {Lt[t], w}, {q[t], Mv}},
                  RowSense::le, Mv);
    {
        std::vector<Term> terms;
        for (int t : targets) terms.push_back({q[t], 1.0});
        m.add_row("select_one", "select_one", std::move(terms), RowSense::eq, 1.0);
    }
    for (int t : branches)
        m.add_row(t_name("b_le_d", t), "b_le_d", {{b[t], 1.0}, {d[t], -1.0}}, RowSense::le, 0.0);
    return m;
}

long Census::total_variables() const {
    long s = 0;
    for (const auto& [_, v] : variables) s += v;
    return s;
}

long Census::total_rows() const {
    long s = 0;
    for (const auto& [_, v] : rows) s += v;
    return s;
}

Census count_census(long n, long p, long k, int depth, long num_targets) {
    if (n <= 0 || p <= 0 || k <= 0 || depth <= 0 || num_targets <= 0)
        throw Error(kModule, "census parameters must be positive");
    const long leaves = 1L << depth;
    const long branch = leaves - 1;
    const long half_paths = depth * (leaves / 2);  // Σ_t |A_L(t)| = Σ_t |E_L(t)|
    Census c;
    c.variables = {{"a", p * branch},  {"b", branch},       {"d", branch},          {"z", n * leaves},
                   {"l", leaves},      {"c", k * leaves},   {"N", leaves},          {"Nk", k * leaves},
                   {"L", num_targets}, {"q", num_targets},  {"I_max", 1}};
    c.rows = {{"split_on", branch},
              {"tree", branch - 1},
              {"left_off", half_paths},
              {"rightmost_on", 2 * branch},
              {"leaf_on", n * leaves},
              {"count", leaves},
              {"assign", n},
              {"left", n * half_paths},
              {"right", n * half_paths},
              {"predict", leaves},
              {"count_k", k * leaves},
              {"loss_ge", k * num_targets},
              {"loss_le", k * num_targets},
              {"vi_ge", num_targets},
              {"vi_le", num_targets},
              {"select_one", 1},
              {"b_le_d", branch}};
    if (c.rows["tree"] == 0) c.rows.erase("tree");
    return c;
}

Census census_of(const MipModel& model) {
    Census c;
    for (const auto& v : model.variables()) ++c.variables[v.family];
    for (const auto& r : model.rows()) ++c.rows[r.family];
    return c;
}

}  // namespace ruleopt
