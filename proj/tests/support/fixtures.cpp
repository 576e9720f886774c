#include "fixtures.hpp"

#include <algorithm>
#include <sstream>

namespace fixtures {

Dataset matrix(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
               std::vector<FeatureKind> kinds, int num_labels) {
    const std::size_t p = rows.empty() ? kinds.size() : rows.front().size();
    if (kinds.empty()) kinds.assign(p, FeatureKind::numerical);
    std::vector<FeatureInfo> feats;
    for (std::size_t j = 0; j < p; ++j) {
        FeatureInfo f;
        f.kind = kinds[j];
        if (f.kind == FeatureKind::onehot) {
            f.source_column = "c" + std::to_string(j);
            f.category = "v";
            f.name = f.source_column + "=v";
        } else {
            f.name = "x" + std::to_string(j);
            f.source_column = f.name;
        }
        feats.push_back(f);
    }
    std::vector<double> values;
    for (const auto& r : rows) values.insert(values.end(), r.begin(), r.end());
    std::vector<std::string> names;
    for (int k = 0; k < num_labels; ++k) names.push_back(std::to_string(k));
    return Dataset::from_matrix(values, labels, feats, names);
}

Dataset sensitivity() {
    std::vector<int> ordered;
    auto push = [&](int label, int count) { ordered.insert(ordered.end(), count, label); };
    push(1, 38);
    push(0, 1);
    push(1, 7);
    push(0, 1);
    push(1, 3);
    push(0, 4);
    push(1, 5);
    push(0, 5);
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 64; ++i) rows.push_back({(63 - i) / 63.0});
    return matrix(rows, ordered);
}

namespace {

StructureSpec random_spec(std::mt19937_64& rng, int depth, const std::vector<FeatureGroup>& groups) {
    TreeShape shape(depth);
    StructureSpec spec;
    spec.depth = depth;
    spec.split.assign(shape.num_branch(), false);
    spec.group.assign(shape.num_branch(), "all");
    spec.target.assign(shape.num_leaves(), false);
    std::bernoulli_distribution coin(0.75);
    for (int t : shape.branch_nodes()) {
        bool parent_ok = t == 1 || spec.split[t / 2 - 1];
        spec.split[t - 1] = parent_ok && (t == 1 ? true : coin(rng));
        spec.group[t - 1] = groups[rng() % groups.size()].name;
    }
    std::bernoulli_distribution pick(0.6);
    bool any = false;
    for (auto&& v : spec.target) {
        v = pick(rng);
        any = any || v;
    }
    if (!any) spec.target[rng() % spec.target.size()] = true;
    return spec;
}

}  // namespace

Instance random_instance(std::mt19937_64& rng, int max_n, int max_p, int max_depth,
                         const std::vector<double>& weights) {
    for (;;) {
        const int n = 4 + static_cast<int>(rng() % (max_n - 3));
        const int p = 1 + static_cast<int>(rng() % max_p);
        const int k = rng() % 4 == 0 ? 3 : 2;
        std::vector<FeatureKind> kinds;
        std::vector<int> levels;
        std::vector<bool> reaches_one;
        for (int j = 0; j < p; ++j) {
            bool onehot = rng() % 3 == 0;
            kinds.push_back(onehot ? FeatureKind::onehot : FeatureKind::numerical);
            levels.push_back(onehot ? 2 : 2 + static_cast<int>(rng() % 7));
            reaches_one.push_back(onehot || rng() % 4 != 0);
        }
        std::vector<std::vector<double>> rows(n);
        std::vector<int> labels(n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < p; ++j) {
                int r = static_cast<int>(rng() % levels[j]);
                double denom = reaches_one[j] ? levels[j] - 1 : levels[j];
                rows[i].push_back(r / denom);
            }
            labels[i] = static_cast<int>(rng() % k);
        }
        Instance inst;
        inst.ds = matrix(rows, labels, kinds, k);
        inst.w = weights[rng() % weights.size()];
        inst.groups = derive_default_groups(inst.ds);
        const int depth = 1 + static_cast<int>(rng() % max_depth);
        inst.spec = random_spec(rng, depth, inst.groups);
        try {
            inst.fixings = apply_bsc(inst.spec, inst.shape(), inst.ds, inst.groups);
        } catch (const std::exception&) {
            continue;  // e.g. a split node whose group has no splittable feature
        }
        return inst;
    }
}

Instance with_chain(Dataset ds, const std::string& chain, double w) {
    Instance inst;
    inst.ds = std::move(ds);
    inst.w = w;
    inst.groups = derive_default_groups(inst.ds);
    inst.spec = StructureSpec::from_chain(chain);
    inst.fixings = apply_bsc(inst.spec, inst.shape(), inst.ds, inst.groups);
    return inst;
}

Planted planted(int n, int p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto in = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
    const std::size_t a = 1, b = static_cast<std::size_t>(p - 1);
    const int pos = n * 3 / 5;
    const int neg = n - pos;
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
        std::vector<double> r(p);
        for (auto& v : r) v = in(0.0, 1.0);
        if (i < pos) {
            r[a] = in(0.6, 1.0);
            r[b] = in(0.0, 0.29);
        } else if (i < pos + neg / 2) {
            r[a] = in(0.0, 0.59);
        } else {
            r[a] = in(0.6, 1.0);
            r[b] = in(0.31, 1.0);
        }
        rows.push_back(r);
        labels.push_back(i < pos ? 1 : 0);
    }
    // Pin the range so the data is already min-max normalized.
    for (int j = 0; j < p; ++j) {
        rows[0][j] = j == static_cast<int>(b) ? 0.0 : 1.0;
        rows[pos][j] = j == static_cast<int>(a) ? 0.0 : (j == static_cast<int>(b) ? 1.0 : 0.0);
    }
    Planted out;
    out.ds = matrix(rows, labels);
    out.signature = {{a, Direction::at_or_above}, {b, Direction::below}};
    out.positives = pos;
    return out;
}

Dataset checkerboard() {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 8; ++j) {
            rows.push_back({i / 7.0, j / 7.0});
            labels.push_back((i < 4) != (j < 4) ? 1 : 0);
        }
    }
    return matrix(rows, labels);
}

Dataset mixed(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 80; ++i) {
        double n1 = static_cast<double>(rng() % 11) / 10.0;
        double n2 = static_cast<double>(rng() % 6) / 5.0;
        int color = static_cast<int>(rng() % 3);
        bool y = (color == 0 && n1 >= 0.5) || (color == 2 && n2 < 0.3);
        if (rng() % 10 == 0) y = !y;
        rows.push_back({n1, n2, color == 0 ? 1.0 : 0.0, color == 1 ? 1.0 : 0.0, color == 2 ? 1.0 : 0.0});
        labels.push_back(y ? 1 : 0);
    }
    rows[0][0] = 1.0;
    rows[0][1] = 1.0;
    rows[1][0] = 0.0;
    rows[1][1] = 0.0;
    return matrix(rows, labels,
                  {FeatureKind::numerical, FeatureKind::numerical, FeatureKind::onehot, FeatureKind::onehot,
                   FeatureKind::onehot});
}

std::string planted_csv(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const char* colors[] = {"red", "green", "blue"};
    std::ostringstream out;
    out << "age,income,noise,color,label\n";
    for (int i = 0; i < n; ++i) {
        // 60% positives; each negative breaks exactly one of the two conditions.
        int kind = static_cast<int>(rng() % 10);
        int age = kind < 8 ? 40 + static_cast<int>(rng() % 38) : 18 + static_cast<int>(rng() % 22);
        int color = 0;
        if (kind >= 8)
            color = static_cast<int>(rng() % 3);
        else if (kind >= 6)
            color = 1 + static_cast<int>(rng() % 2);
        int income = 10 + static_cast<int>(rng() % 90);
        int noise = static_cast<int>(rng() % 50);
        bool y = age >= 40 && color == 0;
        out << age << ',' << income << ',' << noise << ',' << colors[color] << ',' << (y ? "yes" : "no") << "\n";
    }
    return out.str();
}

}  // namespace fixtures
