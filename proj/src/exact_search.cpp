#include "ruleopt/exact_search.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "ruleopt/error.hpp"

namespace ruleopt {

namespace {

constexpr const char* kModule = "exact_search";
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

// Per-feature ranking of the samples. Cut j separates ranks <= j from
// ranks > j and is realized by thresholds[j].
struct FeatureIndex {
    std::vector<int> rank;
    std::vector<int> order;
    std::vector<double> thresholds;
    int num_ranks = 0;
    bool all_left = false;  // cut num_ranks-1 (b = 1) sends everything left
};

FeatureIndex index_feature(const Dataset& ds, std::size_t p) {
    FeatureIndex fi;
    const std::size_t n = ds.num_samples();
    fi.order.resize(n);
    std::iota(fi.order.begin(), fi.order.end(), 0);
    std::stable_sort(fi.order.begin(), fi.order.end(),
                     [&](int a, int b) { return ds.value(a, p) < ds.value(b, p); });
    fi.rank.assign(n, 0);
    int r = -1;
    double prev = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double v = ds.value(fi.order[k], p);
        if (k == 0 || v != prev) ++r;
        fi.rank[fi.order[k]] = r;
        prev = v;
    }
    fi.num_ranks = r + 1;
    fi.thresholds = candidate_thresholds(ds, p);
    fi.all_left = all_left_admissible(ds, p);
    if (fi.all_left) fi.thresholds.push_back(1.0);
    return fi;
}

// -1 is the degenerate cut (b = 0): nothing goes left.
struct Choice {
    std::size_t feature = 0;
    int cut = -1;
};

struct Position {
    int node = 0;
    Direction direction = Direction::below;
    const NodeFixing* fixing = nullptr;
};

struct Shared {
    std::atomic<double> best{kNegInf};
    std::atomic<bool> stop{false};
    std::atomic<long> nodes{0};
    std::mutex mu;
    std::vector<TracePoint> trace;
    double time_to_best = 0.0;
    Clock::time_point start;
    Clock::time_point deadline;
    const std::function<void(const TracePoint&)>* callback = nullptr;

    double seconds() const {
        return std::chrono::duration<double>(Clock::now() - start).count();
    }

    void offer(double vi) {
        double cur = best.load();
        while (vi > cur) {
            if (best.compare_exchange_weak(cur, vi)) {
                std::lock_guard lock(mu);
                TracePoint tp{static_cast<int>(trace.size()), vi, seconds()};
                // A later, smaller improvement may win the CAS race after a larger one.
                if (!trace.empty() && trace.back().vi >= vi) return;
                trace.push_back(tp);
                time_to_best = tp.seconds;
                if (callback && *callback) (*callback)(tp);
                return;
            }
        }
    }
};

struct TaskResult {
    bool finished = false;
    bool found = false;
    double value = kNegInf;
    std::vector<Choice> choices;
};

struct Task {
    std::size_t path = 0;      // index into the target path list
    std::size_t feature = 0;   // first-position feature
    double root_bound = 0.0;
};

class PathSearch {
public:
    PathSearch(const Dataset& ds, const std::vector<FeatureIndex>& index, double w, Shared& shared)
        : ds_(ds), index_(index), w_(w), shared_(shared), k_(ds.num_labels()),
          mark_(ds.num_samples(), 0) {}

    TaskResult run(const std::vector<Position>& positions, std::size_t first_feature,
                   std::span<const int> all) {
        positions_ = &positions;
        first_feature_ = first_feature;
        result_ = TaskResult{};
        current_.assign(positions.size(), Choice{});
        buffers_.resize(positions.size());
        if (positions.size() == 1)
            sweep_last(0, all);
        else
            descend(0, all);
        result_.finished = !shared_.stop.load();
        return result_;
    }

    // Largest max-label count among the first position's options: a bound
    // on everything below this task.
    double root_bound(const Position& pos, std::size_t f, std::span<const int> all) {
        if (buffers_.empty()) buffers_.resize(1);
        double bound = 0.0;
        for_each_option(pos, f, all, 0, [&](int, std::span<const int>, const std::vector<long>& counts) {
            bound = std::max(bound, static_cast<double>(*std::max_element(counts.begin(), counts.end())));
            return true;
        });
        return bound;
    }

private:
    std::span<const int> sorted_by(std::span<const int> s, std::size_t f, std::size_t level) {
        auto& out = buffers_[level];
        out.clear();
        const auto& fi = index_[f];
        if (s.size() * 8 >= ds_.num_samples()) {
            for (int i : s) mark_[i] = 1;
            for (int i : fi.order)
                if (mark_[i]) out.push_back(i);
            for (int i : s) mark_[i] = 0;
        } else {
            out.assign(s.begin(), s.end());
            std::sort(out.begin(), out.end(), [&](int a, int b) {
                return fi.rank[a] != fi.rank[b] ? fi.rank[a] < fi.rank[b] : a < b;
            });
        }
        return out;
    }

    // Calls visit(cut, subset, counts) for every distinct partition in
    // ascending threshold order; visit returns false to stop.
    template <class Visit>
    void for_each_option(const Position& pos, std::size_t f, std::span<const int> s,
                         std::size_t level, Visit&& visit) {
        const auto& fi = index_[f];
        auto sorted = sorted_by(s, f, level);
        std::vector<long> counts;
        std::vector<long> total(k_, 0);
        for (int i : sorted) ++total[ds_.label(i)];
        const bool below = pos.direction == Direction::below;
        const bool fixed = pos.fixing->fixed_threshold.has_value();

        if (!fixed) {
            if (below) {
                counts.assign(k_, 0);
                if (!visit(-1, sorted.first(0), counts)) return;
            } else {
                if (!visit(-1, sorted, total)) return;
            }
        }
        std::vector<long> prefix(k_, 0);
        std::size_t k = 0;
        while (k < sorted.size()) {
            int r = fi.rank[sorted[k]];
            if (fixed && r > 0) break;
            while (k < sorted.size() && fi.rank[sorted[k]] == r) ++prefix[ds_.label(sorted[k++])];
            if (r >= fi.num_ranks - 1) break;  // no cut above the largest value
            if (below) {
                if (!visit(r, sorted.first(k), prefix)) return;
            } else {
                counts.assign(k_, 0);
                for (std::size_t c = 0; c < k_; ++c) counts[c] = total[c] - prefix[c];
                if (!visit(r, sorted.subspan(k), counts)) return;
            }
            if (fixed) return;
        }
        if (!fixed && fi.all_left) {
            if (below) {
                visit(fi.num_ranks - 1, sorted, total);
            } else {
                counts.assign(k_, 0);
                visit(fi.num_ranks - 1, sorted.first(0), counts);
            }
            return;
        }
        if (fixed && k == 0) {
            // No sample on the left of the fixed cut.
            if (below) {
                counts.assign(k_, 0);
                visit(0, sorted.first(0), counts);
            } else {
                visit(0, sorted, total);
            }
        }
    }

    bool tick() {
        long n = shared_.nodes.fetch_add(1, std::memory_order_relaxed);
        if ((n & 1023) == 0 && Clock::now() > shared_.deadline) shared_.stop.store(true);
        return !shared_.stop.load(std::memory_order_relaxed);
    }

    std::vector<std::size_t> features_at(std::size_t level) const {
        if (level == 0) return {first_feature_};
        return (*positions_)[level].fixing->allowed;
    }

    void descend(std::size_t level, std::span<const int> s) {
        const auto& pos = (*positions_)[level];
        for (std::size_t f : features_at(level)) {
            if (shared_.stop.load(std::memory_order_relaxed)) return;
            // sub lives in this level's buffer; children sort into the next one.
            for_each_option(pos, f, s, level, [&](int cut, std::span<const int> sub,
                                                  const std::vector<long>& counts) {
                if (!tick()) return false;
                double bound = static_cast<double>(*std::max_element(counts.begin(), counts.end()));
                if (bound < shared_.best.load(std::memory_order_relaxed)) return true;
                if (result_.found && bound <= result_.value) return true;
                current_[level] = {f, cut};
                if (level + 2 == positions_->size())
                    sweep_last(level + 1, sub);
                else
                    descend(level + 1, sub);
                return !shared_.stop.load(std::memory_order_relaxed);
            });
        }
    }

    void sweep_last(std::size_t level, std::span<const int> s) {
        const auto& pos = (*positions_)[level];
        for (std::size_t f : features_at(level)) {
            if (shared_.stop.load(std::memory_order_relaxed)) return;
            for_each_option(pos, f, s, level, [&](int cut, std::span<const int> sub,
                                                  const std::vector<long>& counts) {
                if (!tick()) return false;
                long majority = *std::max_element(counts.begin(), counts.end());
                double vi = vi_value(static_cast<long>(sub.size()), majority, w_);
                if (vi < shared_.best.load(std::memory_order_relaxed)) return true;
                if (result_.found && vi <= result_.value) return true;
                current_[level] = {f, cut};
                result_.found = true;
                result_.value = vi;
                result_.choices = current_;
                shared_.offer(vi);
                return true;
            });
        }
    }

    const Dataset& ds_;
    const std::vector<FeatureIndex>& index_;
    double w_;
    Shared& shared_;
    std::size_t k_;
    std::vector<std::uint8_t> mark_;
    const std::vector<Position>* positions_ = nullptr;
    std::size_t first_feature_ = 0;
    TaskResult result_;
    std::vector<Choice> current_;
    std::vector<std::vector<int>> buffers_;
};

Rule rule_from_choices(const Dataset& ds, const std::vector<FeatureIndex>& index,
                       const TargetPath& path, const std::vector<Choice>& choices) {
    Rule r;
    r.provenance = Provenance::exact;
    r.leaf = path.leaf;
    r.never_fires = path.structurally_empty;
    for (std::size_t i = 0; i < path.steps.size(); ++i) {
        const auto& c = choices[i];
        Condition cond;
        cond.feature = c.feature;
        cond.direction = path.steps[i].direction;
        cond.threshold = c.cut < 0 ? 0.0 : index[c.feature].thresholds[c.cut];
        cond.epsilon = ds.epsilon(c.feature);
        r.conditions.push_back(cond);
    }
    return r;
}

}  // namespace

std::vector<double> candidate_thresholds(const Dataset& ds, std::size_t feature) {
    if (feature >= ds.num_features()) throw Error(kModule, "feature index out of range");
    const auto& info = ds.feature(feature);
    if (!info.splittable())
        throw Error(kModule, "feature '" + info.name + "' is unsplittable (fewer than two values)");
    std::vector<double> vals;
    vals.reserve(ds.num_samples());
    for (std::size_t i = 0; i < ds.num_samples(); ++i) vals.push_back(ds.value(i, feature));
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    const double eps = *info.epsilon;
    std::vector<double> out;
    out.reserve(vals.size() - 1);
    for (std::size_t j = 0; j + 1 < vals.size(); ++j) {
        double mid = 0.5 * (vals[j] + vals[j + 1]);
        out.push_back(std::min(std::max(mid, vals[j] + eps), vals[j + 1]));
    }
    return out;
}

bool all_left_admissible(const Dataset& ds, std::size_t feature) {
    double vmax = 0.0;
    for (std::size_t i = 0; i < ds.num_samples(); ++i) vmax = std::max(vmax, ds.value(i, feature));
    return vmax + ds.epsilon(feature) <= 1.0 + kSplitTolerance;
}

std::vector<double> admissible_thresholds(const Dataset& ds, std::size_t feature,
                                          const NodeFixing& node) {
    if (node.fixed_threshold) return {*node.fixed_threshold};
    auto c = candidate_thresholds(ds, feature);
    c.insert(c.begin(), 0.0);
    if (all_left_admissible(ds, feature)) c.push_back(1.0);
    return c;
}

std::optional<std::string> admissibility_error(const Rule& rule, const BscFixings& fixings,
                                               const TreeShape& shape) {
    if (!fixings.is_target(rule.leaf))
        return "leaf " + std::to_string(rule.leaf) + " is not a target leaf";
    auto paths = target_paths(fixings, shape);
    auto it = std::find_if(paths.begin(), paths.end(),
                           [&](const TargetPath& p) { return p.leaf == rule.leaf; });
    const TargetPath& path = *it;
    if (path.structurally_empty) {
        if (!rule.never_fires) return "leaf " + std::to_string(rule.leaf) + " is structurally empty";
        return std::nullopt;
    }
    if (rule.never_fires) return "rule is flagged empty but its leaf is reachable";
    if (rule.conditions.size() != path.steps.size())
        return "rule has " + std::to_string(rule.conditions.size()) + " conditions, path needs " +
               std::to_string(path.steps.size());
    for (std::size_t i = 0; i < path.steps.size(); ++i) {
        const auto& c = rule.conditions[i];
        const auto& nf = fixings.node(path.steps[i].node);
        if (c.direction != path.steps[i].direction)
            return "condition " + std::to_string(i) + " has the wrong direction";
        if (!std::binary_search(nf.allowed.begin(), nf.allowed.end(), c.feature))
            return "condition " + std::to_string(i) + " uses a feature outside group '" + nf.group + "'";
        if (nf.fixed_threshold && std::abs(c.threshold - *nf.fixed_threshold) > 1e-12)
            return "condition " + std::to_string(i) + " must use the fixed threshold";
        if (c.threshold < 0.0 || c.threshold > 1.0)
            return "condition " + std::to_string(i) + " has a threshold outside [0,1]";
    }
    return std::nullopt;
}

const char* to_string(SolveStatus s) { return s == SolveStatus::optimal ? "optimal" : "time_limit"; }

OptResult solve(const Dataset& ds, const TreeShape& shape, const BscFixings& fixings, double w,
                const SearchBudget& budget, const SearchOptions& options) {
    check_weight(w);
    if (ds.num_samples() == 0) throw Error(kModule, "empty dataset");
    if (fixings.depth != shape.depth()) throw Error(kModule, "fixings do not match the tree shape");

    Shared shared;
    shared.start = Clock::now();
    double limit = std::max(0.0, budget.time_limit);
    shared.deadline = shared.start + std::chrono::duration_cast<Clock::duration>(
                                         std::chrono::duration<double>(std::min(limit, 1e9)));
    shared.callback = &options.on_improvement;

    std::optional<Rule> incumbent;
    double incumbent_value = kNegInf;
    if (budget.incumbent) {
        if (auto err = admissibility_error(*budget.incumbent, fixings, shape))
            throw Error(kModule, "incumbent is not admissible: " + *err);
        incumbent = *budget.incumbent;
        incumbent->label.reset();
        auto st = evaluate(*incumbent, ds, w);
        incumbent->label = st.label;
        incumbent_value = st.vi;
        shared.offer(incumbent_value);
    }

    std::vector<FeatureIndex> index(ds.num_features());
    for (std::size_t p = 0; p < ds.num_features(); ++p)
        if (ds.feature(p).splittable()) index[p] = index_feature(ds, p);

    auto paths = target_paths(fixings, shape);
    std::vector<int> all(ds.num_samples());
    std::iota(all.begin(), all.end(), 0);

    // Paths without a split position are evaluated directly.
    struct Fixed {
        std::size_t path;
        double value;
    };
    std::vector<Fixed> direct;
    std::vector<std::vector<Position>> positions(paths.size());
    std::vector<Task> tasks;
    PathSearch probe(ds, index, w, shared);
    for (std::size_t pi = 0; pi < paths.size(); ++pi) {
        const auto& path = paths[pi];
        if (path.structurally_empty || path.steps.empty()) {
            double v = path.structurally_empty
                           ? 0.0
                           : evaluate(rule_from_choices(ds, index, path, {}), ds, w).vi;
            direct.push_back({pi, v});
            shared.offer(v);
            continue;
        }
        for (const auto& step : path.steps)
            positions[pi].push_back({step.node, step.direction, &fixings.node(step.node)});
        for (std::size_t f : positions[pi][0].fixing->allowed)
            tasks.push_back({pi, f, probe.root_bound(positions[pi][0], f, all)});
    }

    std::vector<std::size_t> schedule(tasks.size());
    std::iota(schedule.begin(), schedule.end(), std::size_t{0});
    if (options.priorities)
        std::stable_sort(schedule.begin(), schedule.end(), [&](auto a, auto b) {
            return tasks[a].root_bound > tasks[b].root_bound;
        });

    std::vector<TaskResult> results(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        PathSearch search(ds, index, w, shared);
        for (;;) {
            std::size_t k = next.fetch_add(1);
            if (k >= schedule.size()) return;
            const auto& task = tasks[schedule[k]];
            if (Clock::now() > shared.deadline) shared.stop.store(true);
            if (shared.stop.load()) return;
            results[schedule[k]] = search.run(positions[task.path], task.feature, all);
        }
    };
    int threads = options.threads > 0 ? options.threads
                                      : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    threads = std::max(1, std::min<int>(threads, static_cast<int>(tasks.size())));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    }

    // Deterministic reduction in canonical (leaf, feature) order.
    OptResult out;
    double best = kNegInf;
    std::optional<Rule> best_rule;
    auto consider = [&](double value, const TargetPath& path, const std::vector<Choice>& choices) {
        if (value > best) {
            best = value;
            best_rule = rule_from_choices(ds, index, path, choices);
        }
    };
    std::size_t d = 0, t = 0;
    for (std::size_t pi = 0; pi < paths.size(); ++pi) {
        for (; d < direct.size() && direct[d].path == pi; ++d) consider(direct[d].value, paths[pi], {});
        for (; t < tasks.size() && tasks[t].path == pi; ++t)
            if (results[t].found) consider(results[t].value, paths[pi], results[t].choices);
    }
    if (incumbent && incumbent_value > best) {
        best = incumbent_value;
        best_rule = incumbent;
    }
    if (!best_rule && shared.stop.load() && !paths.empty()) {
        // Stopped before any task finished: report the first path with
        // every split at its first admissible threshold.
        const auto& path = paths.front();
        Rule r;
        r.provenance = Provenance::exact;
        r.leaf = path.leaf;
        for (const auto& step : path.steps) {
            const auto& nf = fixings.node(step.node);
            std::size_t f = nf.allowed.front();
            r.conditions.push_back({f, step.direction, nf.fixed_threshold.value_or(0.0), ds.epsilon(f)});
        }
        best = evaluate(r, ds, w).vi;
        best_rule = std::move(r);
    }
    if (!best_rule) throw Error(kModule, "search produced no rule");

    Rule rule = *best_rule;
    if (rule.provenance == Provenance::exact) {
        auto st = evaluate(rule, ds, w);
        if (std::abs(st.vi - best) > 1e-9 * std::max(1.0, std::abs(best)))
            throw Error(kModule, "internal: rule re-evaluation disagrees with the search value");
        rule.label = st.label;
    }

    bool stopped = shared.stop.load();
    double bound = best;
    for (std::size_t k = 0; k < tasks.size(); ++k)
        if (!results[k].finished) bound = std::max(bound, tasks[k].root_bound);

    out.rule = std::move(rule);
    out.i_max = best;
    out.status = stopped ? SolveStatus::time_limit : SolveStatus::optimal;
    out.upper_bound = stopped ? bound : best;
    out.elapsed = shared.seconds();
    out.nodes = shared.nodes.load();
    {
        std::lock_guard lock(shared.mu);
        out.trace = shared.trace;
        out.time_to_best = shared.time_to_best;
    }
    return out;
}

OracleResult brute_force_oracle(const Dataset& ds, const TreeShape& shape, const BscFixings& fixings,
                                double w, long cap) {
    check_weight(w);
    auto paths = target_paths(fixings, shape);

    // thresholds[path][step] -> list of (feature, threshold)
    std::vector<std::vector<std::vector<std::pair<std::size_t, double>>>> options(paths.size());
    double total = 0.0;
    for (std::size_t pi = 0; pi < paths.size(); ++pi) {
        double combos = 1.0;
        for (const auto& step : paths[pi].steps) {
            const auto& nf = fixings.node(step.node);
            std::vector<std::pair<std::size_t, double>> opts;
            for (auto f : nf.allowed)
                for (double b : admissible_thresholds(ds, f, nf)) opts.emplace_back(f, b);
            combos *= static_cast<double>(opts.size());
            options[pi].push_back(std::move(opts));
        }
        total += combos;
    }
    if (total > static_cast<double>(cap))
        throw Error(kModule, "oracle cap exceeded: " + std::to_string(static_cast<long long>(total)) +
                                 " candidate rules");

    OracleResult out;
    out.i_max = kNegInf;
    for (std::size_t pi = 0; pi < paths.size(); ++pi) {
        const auto& path = paths[pi];
        Rule r;
        r.provenance = Provenance::exact;
        r.leaf = path.leaf;
        r.never_fires = path.structurally_empty;
        const std::size_t depth = path.steps.size();
        std::vector<std::size_t> odo(depth, 0);
        r.conditions.resize(depth);
        for (;;) {
            for (std::size_t i = 0; i < depth; ++i) {
                auto [f, b] = options[pi][i][odo[i]];
                r.conditions[i] = {f, path.steps[i].direction, b, ds.epsilon(f)};
            }
            auto st = evaluate(r, ds, w);
            ++out.evaluated;
            if (st.vi > out.i_max) {
                out.i_max = st.vi;
                out.rule = r;
                out.rule.label = st.label;
            }
            std::size_t i = depth;
            while (i > 0) {
                --i;
                if (++odo[i] < options[pi][i].size()) break;
                odo[i] = 0;
                if (i == 0) {
                    i = depth + 1;
                    break;
                }
            }
            if (depth == 0 || i == depth + 1) break;
        }
    }
    return out;
}

}  // namespace ruleopt
