#include "ruleopt/heuristics.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "ruleopt/error.hpp"
#include "ruleopt/exact_search.hpp"

namespace ruleopt {

namespace {
constexpr const char* kModule = "heuristics";

std::vector<long> label_counts(const Dataset& ds, const std::vector<int>& rows) {
    std::vector<long> c(ds.num_labels(), 0);
    for (int i : rows) ++c[ds.label(i)];
    return c;
}

// |S| * gini(S) = |S| - Σ_k n_k^2 / |S|
double weighted_gini(const std::vector<long>& c) {
    long n = 0;
    double sq = 0.0;
    for (long v : c) {
        n += v;
        sq += static_cast<double>(v) * static_cast<double>(v);
    }
    return n == 0 ? 0.0 : static_cast<double>(n) - sq / static_cast<double>(n);
}

bool is_pure(const std::vector<long>& c) {
    return std::count_if(c.begin(), c.end(), [](long v) { return v > 0; }) <= 1;
}

Condition make_condition(const Dataset& ds, std::size_t f, Direction dir, double b) {
    return {f, dir, b, ds.epsilon(f)};
}

std::vector<int> sorted_by(const Dataset& ds, std::vector<int> rows, std::size_t f) {
    std::stable_sort(rows.begin(), rows.end(), [&](int a, int b) { return ds.value(a, f) < ds.value(b, f); });
    return rows;
}

// Size of the prefix of rows (sorted by feature f) that goes left at b.
std::size_t left_size(const Dataset& ds, const std::vector<int>& sorted, std::size_t f, double b,
                      std::size_t from) {
    Condition c = make_condition(ds, f, Direction::below, b);
    std::size_t k = from;
    while (k < sorted.size() && c.fires(ds.value(sorted[k], f))) ++k;
    return k;
}

}  // namespace

std::string HeuristicTree::dump(const Dataset& ds) const {
    std::ostringstream out;
    TreeShape shape(depth);
    for (const auto& nd : nodes) {
        out << std::string(2 * TreeShape::node_depth(nd.node), ' ') << "node " << nd.node << ": ";
        if (shape.is_leaf(nd.node)) {
            out << "leaf";
        } else if (!nd.split) {
            out << "no split";
        } else {
            out << ds.feature(*nd.feature).name << " < " << nd.threshold << (nd.degenerate ? " (degenerate)" : "");
        }
        out << " counts [";
        for (std::size_t k = 0; k < nd.counts.size(); ++k) out << (k ? " " : "") << nd.counts[k];
        out << "]\n";
    }
    return out.str();
}

BsccartResult bsccart_fit(const Dataset& ds, const TreeShape& shape, const BscFixings& fixings, double w) {
    check_weight(w);
    if (fixings.depth != shape.depth()) throw Error(kModule, "fixings do not match the tree depth");
    BsccartResult res;
    res.tree.depth = shape.depth();
    res.tree.nodes.resize(shape.num_nodes());
    std::vector<std::vector<int>> members(shape.num_nodes() + 1);
    members[1].resize(ds.num_samples());
    std::iota(members[1].begin(), members[1].end(), 0);

    for (int t = 1; t <= shape.num_nodes(); ++t) {
        auto& nd = res.tree.nodes[t - 1];
        nd.node = t;
        nd.counts = label_counts(ds, members[t]);
        if (shape.is_leaf(t)) continue;
        const auto& nf = fixings.node(t);
        const auto& rows = members[t];
        if (!nf.split) {
            members[2 * t + 1] = rows;
            continue;
        }
        nd.split = true;

        struct Best {
            double impurity;
            std::size_t feature;
            double threshold;
        };
        std::optional<Best> best;
        if (!is_pure(nd.counts)) {
            for (std::size_t f : nf.allowed) {
                auto sorted = sorted_by(ds, rows, f);
                std::vector<double> ths = nf.fixed_threshold ? std::vector<double>{*nf.fixed_threshold}
                                                             : candidate_thresholds(ds, f);
                std::vector<long> left(ds.num_labels(), 0);
                std::size_t k = 0;
                for (double b : ths) {
                    std::size_t k2 = left_size(ds, sorted, f, b, k);
                    for (; k < k2; ++k) ++left[ds.label(sorted[k])];
                    if (k == 0 || k == sorted.size()) continue;
                    std::vector<long> right(nd.counts);
                    for (std::size_t c = 0; c < right.size(); ++c) right[c] -= left[c];
                    double imp = weighted_gini(left) + weighted_gini(right);
                    // Features and thresholds are visited in ascending order,
                    // so strict improvement keeps the smallest on ties.
                    if (!best || imp < best->impurity) best = Best{imp, f, b};
                }
            }
        }
        if (best) {
            nd.feature = best->feature;
            nd.threshold = best->threshold;
        } else {
            nd.degenerate = true;
            nd.feature = nf.allowed.front();
            nd.threshold = nf.fixed_threshold.value_or(0.0);
        }
        Condition c = make_condition(ds, *nd.feature, Direction::below, nd.threshold);
        for (int i : rows) (c.fires(ds.value(i, *nd.feature)) ? members[2 * t] : members[2 * t + 1]).push_back(i);
    }

    std::optional<double> best_vi;
    for (int leaf : fixings.targets) {
        Rule r;
        r.provenance = Provenance::bsccart;
        r.leaf = leaf;
        std::vector<int> chain;
        for (int child = leaf; child > 1; child /= 2) chain.push_back(child);
        std::reverse(chain.begin(), chain.end());
        for (int child : chain) {
            const auto& nd = res.tree.node(child / 2);
            bool left = child % 2 == 0;
            if (!nd.split) {
                if (left) r.never_fires = true;
                continue;
            }
            r.conditions.push_back(make_condition(ds, *nd.feature, left ? Direction::below : Direction::at_or_above,
                                                  nd.threshold));
        }
        if (r.never_fires) r.conditions.clear();
        auto vr = vi_index(res.tree.node(leaf).counts, w);
        if (!best_vi || vr.vi > *best_vi) {
            best_vi = vr.vi;
            r.label = vr.label;
            res.rule = r;
        }
    }
    res.vi = *best_vi;
    return res;
}

Rule rscrules_fit(const Dataset& ds, const TreeShape& shape, const BscFixings& fixings, double w,
                  std::size_t beam_width) {
    check_weight(w);
    if (fixings.depth != shape.depth()) throw Error(kModule, "fixings do not match the tree depth");

    struct State {
        int node = 1;
        std::vector<Condition> conditions;
        std::vector<int> rows;
        double vi = 0.0;
    };
    auto vi_of = [&](const std::vector<long>& counts) { return vi_index(counts, w).vi; };

    // Completes a partial conjunction with always-true right turns; empty if
    // a fixed-threshold node or a non-target leaf is in the way.
    auto complete = [&](const State& s) -> std::optional<Rule> {
        Rule r;
        r.provenance = Provenance::rscrules;
        r.conditions = s.conditions;
        int t = s.node;
        while (shape.is_branch(t)) {
            const auto& nf = fixings.node(t);
            if (nf.split) {
                if (nf.fixed_threshold) return std::nullopt;
                r.conditions.push_back(make_condition(ds, nf.allowed.front(), Direction::at_or_above, 0.0));
            }
            t = 2 * t + 1;
        }
        if (!fixings.is_target(t)) return std::nullopt;
        r.leaf = t;
        return r;
    };

    // reach[t]: some target leaf below t can receive samples (unsplit nodes
    // only route right).
    std::vector<char> reach(shape.num_nodes() + 1, 0);
    for (int t = shape.num_nodes(); t >= 1; --t) {
        if (shape.is_leaf(t))
            reach[t] = fixings.is_target(t);
        else
            reach[t] = reach[2 * t + 1] || (fixings.node(t).split && reach[2 * t]);
    }
    if (!reach[1]) {
        // Every target is structurally empty.
        Rule r;
        r.provenance = Provenance::rscrules;
        r.leaf = fixings.targets.front();
        r.never_fires = true;
        r.label = 0;
        return r;
    }

    State root;
    root.rows.resize(ds.num_samples());
    std::iota(root.rows.begin(), root.rows.end(), 0);
    root.vi = vi_of(label_counts(ds, root.rows));

    std::optional<Rule> best;
    double best_vi = 0.0;
    auto consider = [&](const State& s) {
        if (best && s.vi <= best_vi) return;
        if (auto r = complete(s)) {
            best = std::move(r);
            best_vi = s.vi;
        }
    };
    consider(root);

    std::vector<State> beam{root};
    while (!beam.empty() && shape.is_branch(beam.front().node)) {
        struct Cand {
            double vi;
            std::size_t parent;
            std::size_t feature;
            int dir;  // 0 below, 1 at_or_above, 2 pass-through
            std::size_t order;
            double threshold;
            std::size_t lo, hi;  // slice of the parent's rows sorted by feature
        };
        std::vector<Cand> cands;
        std::vector<std::vector<std::vector<int>>> sorted(beam.size());
        for (std::size_t bi = 0; bi < beam.size(); ++bi) {
            const State& s = beam[bi];
            const auto& nf = fixings.node(s.node);
            if (!nf.split) {
                cands.push_back({s.vi, bi, 0, 2, 0, 0.0, 0, s.rows.size()});
                continue;
            }
            sorted[bi].resize(ds.num_features());
            for (std::size_t f : nf.allowed) {
                auto& srt = sorted[bi][f] = sorted_by(ds, s.rows, f);
                auto ths = admissible_thresholds(ds, f, nf);
                std::vector<long> total = label_counts(ds, srt), left(ds.num_labels(), 0);
                std::vector<long> below_right(ds.num_labels(), 0);
                std::size_t k = 0, r0 = 0;
                for (std::size_t j = 0; j < ths.size(); ++j) {
                    double b = ths[j];
                    std::size_t k2 = left_size(ds, srt, f, b, k);
                    for (; k < k2; ++k) ++left[ds.label(srt[k])];
                    // Right side: x >= b - tol, a suffix that may start after k.
                    Condition rc = make_condition(ds, f, Direction::at_or_above, b);
                    while (r0 < srt.size() && !rc.fires(ds.value(srt[r0], f))) ++below_right[ds.label(srt[r0++])];
                    std::vector<long> right(total);
                    for (std::size_t c = 0; c < right.size(); ++c) right[c] -= below_right[c];
                    if (reach[2 * s.node]) cands.push_back({vi_of(left), bi, f, 0, j, b, 0, k});
                    if (reach[2 * s.node + 1]) cands.push_back({vi_of(right), bi, f, 1, j, b, r0, srt.size()});
                }
            }
        }
        std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.vi != b.vi) return a.vi > b.vi;
            if (a.parent != b.parent) return a.parent < b.parent;
            if (a.feature != b.feature) return a.feature < b.feature;
            if (a.dir != b.dir) return a.dir < b.dir;
            return a.order < b.order;
        });
        if (beam_width > 0 && cands.size() > beam_width) cands.resize(beam_width);

        std::vector<State> next;
        for (const auto& c : cands) {
            const State& p = beam[c.parent];
            State s;
            s.vi = c.vi;
            s.conditions = p.conditions;
            if (c.dir == 2) {
                s.node = 2 * p.node + 1;
                s.rows = p.rows;
            } else {
                Direction d = c.dir == 0 ? Direction::below : Direction::at_or_above;
                s.node = 2 * p.node + (c.dir == 0 ? 0 : 1);
                s.conditions.push_back(make_condition(ds, c.feature, d, c.threshold));
                const auto& srt = sorted[c.parent][c.feature];
                s.rows.assign(srt.begin() + c.lo, srt.begin() + c.hi);
            }
            next.push_back(std::move(s));
        }
        for (const auto& s : next) consider(s);
        beam = std::move(next);
    }
    if (!best) throw Error(kModule, "no admissible rule reaches a target leaf");
    best->label = evaluate(*best, ds, w).label;
    return *best;
}

}  // namespace ruleopt
