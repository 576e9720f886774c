#include "ruleopt/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "ruleopt/error.hpp"

namespace ruleopt {

namespace {

constexpr const char* kModule = "dataset";

// One-hot splits use b = 0.5, so ε must not exceed 0.5 there.
constexpr double kOneHotEpsilonCap = 0.5;

std::string trim(std::string_view s) {
    auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delim) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

std::optional<double> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    if (*begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

ColumnKind parse_kind(const std::string& s) {
    if (s == "num" || s == "numerical" || s == "numeric") return ColumnKind::numerical;
    if (s == "cat" || s == "categorical") return ColumnKind::categorical;
    if (s == "target" || s == "label") return ColumnKind::target;
    throw Error(kModule, "unknown column kind '" + s + "'");
}

std::optional<double> epsilon_of(std::vector<double> vals) {
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    if (vals.size() < 2) return std::nullopt;
    double best = vals[1] - vals[0];
    for (std::size_t i = 2; i < vals.size(); ++i) best = std::min(best, vals[i] - vals[i - 1]);
    return best;
}

// ε for every feature of a row-major matrix, with the one-hot cap applied.
double assign_epsilons(std::span<const double> values, std::size_t n_rows,
                       std::vector<FeatureInfo>& features) {
    const std::size_t p = features.size();
    std::vector<std::vector<double>> columns(p);
    for (auto& c : columns) c.reserve(n_rows);
    for (std::size_t r = 0; r < n_rows; ++r)
        for (std::size_t j = 0; j < p; ++j) columns[j].push_back(values[r * p + j]);
    auto eps = compute_epsilons(columns);
    double eps_max = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        auto e = eps.per_feature[j];
        if (e && features[j].kind == FeatureKind::onehot) e = std::min(*e, kOneHotEpsilonCap);
        features[j].epsilon = e;
        if (e) eps_max = std::max(eps_max, *e);
    }
    return eps_max;
}

}  // namespace

Schema Schema::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(kModule, "cannot open schema file '" + path + "'");
    Schema schema;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::string name, kind;
        if (!(ss >> name)) continue;
        if (!(ss >> kind))
            throw Error(kModule, "schema line " + std::to_string(lineno) + ": missing kind");
        ColumnKind k = parse_kind(kind);
        if (k == ColumnKind::target) {
            if (!schema.target.empty() && schema.target != name)
                throw Error(kModule, "schema declares more than one target column");
            schema.target = name;
        } else {
            schema.kinds[name] = k;
        }
    }
    return schema;
}

std::size_t RawTable::target_index() const {
    auto it = std::find(kinds.begin(), kinds.end(), ColumnKind::target);
    if (it == kinds.end()) throw Error(kModule, "table has no target column");
    return static_cast<std::size_t>(it - kinds.begin());
}

RawTable parse_table(const std::string& text, const Schema& schema, const LoadOptions& opts) {
    std::istringstream in(text);
    std::string line;
    RawTable table;
    if (!std::getline(in, line)) throw Error(kModule, "empty table");
    table.columns = split_line(line, opts.delimiter);

    if (schema.target.empty()) throw Error(kModule, "schema names no target column");
    bool found_target = false;
    for (const auto& name : table.columns) {
        if (name == schema.target) {
            if (found_target) throw Error(kModule, "duplicate target column '" + name + "'");
            found_target = true;
            table.kinds.push_back(ColumnKind::target);
        } else if (auto it = schema.kinds.find(name); it != schema.kinds.end()) {
            table.kinds.push_back(it->second);
        } else {
            table.kinds.push_back(ColumnKind::numerical);
        }
    }
    if (!found_target) throw Error(kModule, "unknown target column '" + schema.target + "'");
    for (const auto& [name, kind] : schema.kinds) {
        if (std::find(table.columns.begin(), table.columns.end(), name) == table.columns.end())
            throw Error(kModule, "schema names unknown column '" + name + "'");
    }

    auto is_marker = [&](const std::string& s) {
        return std::find(opts.missing_markers.begin(), opts.missing_markers.end(), s) !=
               opts.missing_markers.end();
    };

    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto fields = split_line(line, opts.delimiter);
        if (fields.size() != table.columns.size()) {
            throw Error(kModule, "row " + std::to_string(lineno) + " has " +
                                     std::to_string(fields.size()) + " fields, expected " +
                                     std::to_string(table.columns.size()));
        }
        std::vector<Cell> row;
        row.reserve(fields.size());
        for (std::size_t j = 0; j < fields.size(); ++j) {
            const auto& f = fields[j];
            if (is_marker(f)) {
                row.emplace_back(std::monostate{});
            } else if (table.kinds[j] == ColumnKind::numerical) {
                if (auto v = parse_number(f))
                    row.emplace_back(*v);
                else
                    row.emplace_back(std::monostate{});
            } else {
                row.emplace_back(f);
            }
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

RawTable load_table(const std::string& path, const Schema& schema, const LoadOptions& opts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(kModule, "cannot open data file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_table(buf.str(), schema, opts);
}

double FeatureInfo::denormalize(double v) const { return min + v * (max - min); }

double FeatureInfo::normalize(double original) const {
    double range = max - min;
    return range > 0.0 ? (original - min) / range : original - min;
}

Dataset Dataset::from_matrix(std::vector<double> values, std::vector<int> labels,
                             std::vector<FeatureInfo> features,
                             std::vector<std::string> label_names) {
    Dataset ds = with_metadata(std::move(values), std::move(labels), std::move(features),
                               std::move(label_names));
    for (std::size_t j = 0; j < ds.features_.size(); ++j) {
        for (std::size_t r = 0; r < ds.num_samples(); ++r) {
            double v = ds.value(r, j);
            if (ds.features_[j].kind == FeatureKind::onehot) {
                if (v != 0.0 && v != 1.0)
                    throw Error(kModule, "one-hot feature '" + ds.features_[j].name +
                                             "' has a value outside {0,1}");
            } else if (!(v >= 0.0 && v <= 1.0)) {
                throw Error(kModule, "feature '" + ds.features_[j].name +
                                         "' has a value outside [0,1]");
            }
        }
    }
    ds.epsilon_max_ = assign_epsilons(ds.values_, ds.num_samples(), ds.features_);
    return ds;
}

Dataset Dataset::with_metadata(std::vector<double> values, std::vector<int> labels,
                               std::vector<FeatureInfo> features,
                               std::vector<std::string> label_names) {
    if (values.size() != labels.size() * features.size())
        throw Error(kModule, "value matrix size does not match |N| x |P|");
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= label_names.size())
            throw Error(kModule, "label index out of range");
    }
    Dataset ds;
    ds.values_ = std::move(values);
    ds.labels_ = std::move(labels);
    ds.features_ = std::move(features);
    ds.label_names_ = std::move(label_names);
    for (const auto& f : ds.features_)
        if (f.epsilon) ds.epsilon_max_ = std::max(ds.epsilon_max_, *f.epsilon);
    return ds;
}

std::vector<double> Dataset::epsilons() const {
    std::vector<double> out(features_.size());
    for (std::size_t p = 0; p < features_.size(); ++p) out[p] = epsilon(p);
    return out;
}

std::optional<std::size_t> Dataset::find_feature(const std::string& name) const {
    for (std::size_t p = 0; p < features_.size(); ++p)
        if (features_[p].name == name) return p;
    return std::nullopt;
}

std::optional<int> Dataset::find_label(const std::string& name) const {
    for (std::size_t k = 0; k < label_names_.size(); ++k)
        if (label_names_[k] == name) return static_cast<int>(k);
    return std::nullopt;
}

std::vector<std::string> Dataset::source_columns() const {
    std::vector<std::string> out;
    for (const auto& f : features_)
        if (std::find(out.begin(), out.end(), f.source_column) == out.end())
            out.push_back(f.source_column);
    return out;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    const std::size_t p = features_.size();
    std::vector<double> vals;
    vals.reserve(rows.size() * p);
    std::vector<int> labs;
    labs.reserve(rows.size());
    for (auto r : rows) {
        if (r >= num_samples()) throw Error(kModule, "row index out of range");
        auto src = row(r);
        vals.insert(vals.end(), src.begin(), src.end());
        labs.push_back(labels_[r]);
    }
    return with_metadata(std::move(vals), std::move(labs), features_, label_names_);
}

EpsilonResult compute_epsilons(std::span<const std::vector<double>> values_per_feature) {
    EpsilonResult out;
    for (const auto& vals : values_per_feature) {
        auto e = epsilon_of(vals);
        out.per_feature.push_back(e);
        if (e) out.max = std::max(out.max, *e);
    }
    return out;
}

Dataset preprocess(const RawTable& raw, const PreprocessOptions& opts) {
    const std::size_t target = raw.target_index();
    if (std::count(raw.kinds.begin(), raw.kinds.end(), ColumnKind::target) != 1)
        throw Error(kModule, "table must have exactly one target column");

    std::vector<const std::vector<Cell>*> rows;
    for (std::size_t r = 0; r < raw.rows.size(); ++r) {
        const auto& row = raw.rows[r];
        if (row.size() != raw.columns.size())
            throw Error(kModule, "row " + std::to_string(r + 1) + " has wrong arity");
        bool missing = std::any_of(row.begin(), row.end(), is_missing);
        if (missing) {
            if (opts.missing_policy == MissingPolicy::error)
                throw Error(kModule, "missing value in row " + std::to_string(r + 1));
            continue;
        }
        rows.push_back(&row);
    }
    if (rows.empty()) throw Error(kModule, "no rows left after dropping missing values");

    std::vector<FeatureInfo> features;
    // For each encoded feature: source column and, for one-hot, the category.
    for (std::size_t j = 0; j < raw.columns.size(); ++j) {
        if (j == target) continue;
        if (raw.kinds[j] == ColumnKind::numerical) {
            FeatureInfo f;
            f.name = raw.columns[j];
            f.source_column = raw.columns[j];
            f.kind = FeatureKind::numerical;
            double lo = std::get<double>((*rows.front())[j]);
            double hi = lo;
            for (const auto* row : rows) {
                double v = std::get<double>((*row)[j]);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            f.min = lo;
            f.max = hi;
            features.push_back(std::move(f));
        } else {
            std::vector<std::string> cats;
            for (const auto* row : rows) {
                const auto& s = std::get<std::string>((*row)[j]);
                if (std::find(cats.begin(), cats.end(), s) == cats.end()) cats.push_back(s);
            }
            for (const auto& c : cats) {
                FeatureInfo f;
                f.name = raw.columns[j] + "=" + c;
                f.source_column = raw.columns[j];
                f.category = c;
                f.kind = FeatureKind::onehot;
                features.push_back(std::move(f));
            }
        }
    }

    std::set<std::string> label_set;
    for (const auto* row : rows) label_set.insert(std::get<std::string>((*row)[target]));
    std::vector<std::string> label_names(label_set.begin(), label_set.end());

    std::unordered_map<std::string, std::size_t> column_index;
    for (std::size_t j = 0; j < raw.columns.size(); ++j) column_index[raw.columns[j]] = j;

    std::vector<double> values;
    values.reserve(rows.size() * features.size());
    std::vector<int> labels;
    labels.reserve(rows.size());
    for (const auto* row : rows) {
        for (const auto& f : features) {
            const auto& cell = (*row)[column_index[f.source_column]];
            if (f.kind == FeatureKind::numerical) {
                double range = f.max - f.min;
                double v = std::get<double>(cell);
                values.push_back(range > 0.0 ? (v - f.min) / range : 0.0);
            } else {
                values.push_back(std::get<std::string>(cell) == f.category ? 1.0 : 0.0);
            }
        }
        const auto& y = std::get<std::string>((*row)[target]);
        labels.push_back(static_cast<int>(
            std::lower_bound(label_names.begin(), label_names.end(), y) - label_names.begin()));
    }
    return Dataset::from_matrix(std::move(values), std::move(labels), std::move(features),
                                std::move(label_names));
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& ds, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw Error(kModule, "split ratio must lie in (0,1)");
    const std::size_t n = ds.num_samples();
    const auto n_train = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9));
    if (n_train == 0 || n_train >= n) throw Error(kModule, "split leaves an empty side");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

    std::span<const std::size_t> train_rows(order.data(), n_train);
    std::span<const std::size_t> test_rows(order.data() + n_train, n - n_train);

    // Refit min/max of numerical features on the train rows.
    std::vector<FeatureInfo> features = ds.features();
    const std::size_t p = features.size();
    for (std::size_t j = 0; j < p; ++j) {
        auto& f = features[j];
        if (f.kind != FeatureKind::numerical) continue;
        const auto& old = ds.feature(j);
        double lo = old.denormalize(ds.value(train_rows[0], j));
        double hi = lo;
        for (auto r : train_rows) {
            double v = old.denormalize(ds.value(r, j));
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        f.min = lo;
        f.max = hi;
    }

    auto encode = [&](std::span<const std::size_t> rows, bool clamp_train) {
        std::vector<double> vals;
        std::vector<int> labs;
        vals.reserve(rows.size() * p);
        for (auto r : rows) {
            for (std::size_t j = 0; j < p; ++j) {
                double v = ds.value(r, j);
                if (features[j].kind == FeatureKind::numerical) {
                    double range = features[j].max - features[j].min;
                    double orig = ds.feature(j).denormalize(v);
                    v = range > 0.0 ? (orig - features[j].min) / range : 0.0;
                    if (clamp_train) v = std::clamp(v, 0.0, 1.0);
                }
                vals.push_back(v);
            }
            labs.push_back(ds.label(r));
        }
        return std::pair{std::move(vals), std::move(labs)};
    };

    auto [train_vals, train_labs] = encode(train_rows, true);
    Dataset train = Dataset::from_matrix(std::move(train_vals), std::move(train_labs), features,
                                         ds.label_names());
    auto [test_vals, test_labs] = encode(test_rows, false);
    Dataset test = Dataset::with_metadata(std::move(test_vals), std::move(test_labs),
                                          train.features(), ds.label_names());
    return {std::move(train), std::move(test)};
}

const char* to_string(GroupKind k) {
    switch (k) {
        case GroupKind::all: return "all";
        case GroupKind::numerical: return "numerical";
        case GroupKind::categorical: return "categorical";
        case GroupKind::custom: return "custom";
    }
    return "custom";
}

void validate_group(const Dataset& ds, const FeatureGroup& g) {
    for (auto p : g.members) {
        if (p >= ds.num_features())
            throw Error(kModule, "group '" + g.name + "' references feature " + std::to_string(p) +
                                     " out of range");
        auto kind = ds.feature(p).kind;
        if (g.kind == GroupKind::numerical && kind != FeatureKind::numerical)
            throw Error(kModule, "numerical group '" + g.name + "' contains one-hot feature '" +
                                     ds.feature(p).name + "'");
        if (g.kind == GroupKind::categorical && kind != FeatureKind::onehot)
            throw Error(kModule, "categorical group '" + g.name +
                                     "' contains numerical feature '" + ds.feature(p).name + "'");
    }
    if (g.kind == GroupKind::all && g.members.size() != ds.num_features())
        throw Error(kModule, "group '" + g.name + "' of kind all must contain every feature");
}

std::vector<FeatureGroup> derive_default_groups(const Dataset& ds) {
    FeatureGroup all{"all", {}, GroupKind::all};
    FeatureGroup num{"num", {}, GroupKind::numerical};
    FeatureGroup cat{"cat", {}, GroupKind::categorical};
    for (std::size_t p = 0; p < ds.num_features(); ++p) {
        all.members.push_back(p);
        (ds.feature(p).kind == FeatureKind::numerical ? num : cat).members.push_back(p);
    }
    std::vector<FeatureGroup> out{std::move(all)};
    if (!num.members.empty()) out.push_back(std::move(num));
    if (!cat.members.empty()) out.push_back(std::move(cat));
    return out;
}

std::vector<FeatureGroup> groups_from_ranking(const Dataset& ds,
                                              std::span<const std::pair<std::string, double>> ranking,
                                              std::size_t top_k) {
    auto columns = ds.source_columns();
    for (const auto& [name, score] : ranking) {
        if (std::find(columns.begin(), columns.end(), name) == columns.end())
            throw Error(kModule, "ranking references unknown column '" + name + "'");
    }
    if (top_k == 0) throw Error(kModule, "top_k must be positive");
    if (top_k > columns.size())
        throw Error(kModule, "top_k " + std::to_string(top_k) + " exceeds column count " +
                                 std::to_string(columns.size()));
    if (top_k > ranking.size())
        throw Error(kModule, "top_k exceeds the number of ranked columns");

    std::vector<std::size_t> idx(ranking.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](auto a, auto b) { return ranking[a].second > ranking[b].second; });
    std::set<std::string> selected;
    for (std::size_t i = 0; i < top_k; ++i) selected.insert(ranking[idx[i]].first);

    FeatureGroup num{"top_num", {}, GroupKind::numerical};
    FeatureGroup cat{"top_cat", {}, GroupKind::categorical};
    for (std::size_t p = 0; p < ds.num_features(); ++p) {
        if (!selected.count(ds.feature(p).source_column)) continue;
        (ds.feature(p).kind == FeatureKind::numerical ? num : cat).members.push_back(p);
    }
    std::vector<FeatureGroup> out;
    if (!num.members.empty()) out.push_back(std::move(num));
    if (!cat.members.empty()) out.push_back(std::move(cat));
    return out;
}

std::vector<FeatureGroup> groups_from_importance(const Dataset& ds, const std::string& ranking_file,
                                                 std::size_t top_k) {
    std::ifstream in(ranking_file);
    if (!in) throw Error(kModule, "cannot open ranking file '" + ranking_file + "'");
    std::vector<std::pair<std::string, double>> ranking;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto tab = t.find('\t');
        if (tab == std::string::npos) tab = t.find_last_of(' ');
        if (tab == std::string::npos)
            throw Error(kModule, "ranking line " + std::to_string(lineno) + ": expected name<TAB>score");
        auto score = parse_number(trim(t.substr(tab + 1)));
        if (!score)
            throw Error(kModule, "ranking line " + std::to_string(lineno) + ": bad score");
        ranking.emplace_back(trim(t.substr(0, tab)), *score);
    }
    return groups_from_ranking(ds, ranking, top_k);
}

}  // namespace ruleopt
