#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace ruleopt {

enum class ColumnKind { numerical, categorical, target };

/// Column-kind declarations. Columns not listed default to numerical.
struct Schema {
    std::string target;
    std::map<std::string, ColumnKind> kinds;

    /// Reads a sidecar file with one "name kind" pair per line, kind being
    /// one of num|numerical, cat|categorical, target. '#' starts a comment.
    static Schema from_file(const std::string& path);
};

struct LoadOptions {
    char delimiter = ',';
    std::vector<std::string> missing_markers{"", "?"};
};

/// A cell is missing, a number, or a category string.
using Cell = std::variant<std::monostate, double, std::string>;

inline bool is_missing(const Cell& c) { return std::holds_alternative<std::monostate>(c); }

struct RawTable {
    std::vector<std::string> columns;
    std::vector<ColumnKind> kinds;
    std::vector<std::vector<Cell>> rows;

    std::size_t target_index() const;
    std::size_t num_features() const { return columns.empty() ? 0 : columns.size() - 1; }
};

RawTable load_table(const std::string& path, const Schema& schema, const LoadOptions& opts = {});
RawTable parse_table(const std::string& text, const Schema& schema, const LoadOptions& opts = {});

enum class FeatureKind { numerical, onehot };

struct FeatureInfo {
    std::string name;           // "age" or "color=red" for one-hot members
    FeatureKind kind = FeatureKind::numerical;
    std::string source_column;  // original column name
    std::string category;       // one-hot only
    double min = 0.0;           // denormalization: original = min + v * (max - min)
    double max = 1.0;
    std::optional<double> epsilon;  // empty for unsplittable features

    bool splittable() const { return epsilon.has_value(); }
    double denormalize(double v) const;
    double normalize(double original) const;
};

/// Normalized, encoded table. Values are row-major, |N| x |P|. Immutable
/// once built; every mutation goes through a factory that re-validates.
class Dataset {
public:
    Dataset() = default;

    /// Builds a dataset from already-normalized values, computing ε_p.
    /// Throws if a value of a fitted dataset lies outside [0,1] or a
    /// one-hot value is not in {0,1}.
    static Dataset from_matrix(std::vector<double> values, std::vector<int> labels,
                               std::vector<FeatureInfo> features,
                               std::vector<std::string> label_names);

    /// Keeps the supplied metadata (ε, min/max) as-is and skips the range
    /// check. Used for held-out data encoded with training parameters.
    static Dataset with_metadata(std::vector<double> values, std::vector<int> labels,
                                 std::vector<FeatureInfo> features,
                                 std::vector<std::string> label_names);

    std::size_t num_samples() const { return labels_.size(); }
    std::size_t num_features() const { return features_.size(); }
    std::size_t num_labels() const { return label_names_.size(); }

    double value(std::size_t row, std::size_t feature) const {
        return values_[row * features_.size() + feature];
    }
    std::span<const double> row(std::size_t r) const {
        return {values_.data() + r * features_.size(), features_.size()};
    }
    int label(std::size_t row) const { return labels_[row]; }
    std::span<const int> labels() const { return labels_; }
    std::span<const double> values() const { return values_; }

    const FeatureInfo& feature(std::size_t p) const { return features_[p]; }
    const std::vector<FeatureInfo>& features() const { return features_; }
    const std::vector<std::string>& label_names() const { return label_names_; }

    /// ε_p as used by the split tests; 0 for unsplittable features.
    double epsilon(std::size_t p) const { return features_[p].epsilon.value_or(0.0); }
    std::vector<double> epsilons() const;
    double epsilon_max() const { return epsilon_max_; }

    std::optional<std::size_t> find_feature(const std::string& name) const;
    std::optional<int> find_label(const std::string& name) const;

    /// Original (pre-encoding) columns in first-appearance order.
    std::vector<std::string> source_columns() const;

    /// Rows selected by index, keeping metadata unchanged.
    Dataset subset(std::span<const std::size_t> rows) const;

private:
    std::vector<double> values_;
    std::vector<int> labels_;
    std::vector<FeatureInfo> features_;
    std::vector<std::string> label_names_;
    double epsilon_max_ = 0.0;
};

enum class MissingPolicy { drop_rows, error };

struct PreprocessOptions {
    MissingPolicy missing_policy = MissingPolicy::drop_rows;
};

Dataset preprocess(const RawTable& raw, const PreprocessOptions& opts = {});

struct EpsilonResult {
    std::vector<std::optional<double>> per_feature;
    double max = 0.0;
};

/// Smallest positive gap between adjacent distinct values per feature.
EpsilonResult compute_epsilons(std::span<const std::vector<double>> values_per_feature);

/// Deterministic shuffle, first ceil(ratio*|N|) rows train. Numerical
/// normalization and ε are refit on the train rows and carried to test.
std::pair<Dataset, Dataset> train_test_split(const Dataset& ds, double ratio, std::uint64_t seed);

enum class GroupKind { all, numerical, categorical, custom };

struct FeatureGroup {
    std::string name;
    std::vector<std::size_t> members;
    GroupKind kind = GroupKind::custom;
};

/// {G_A, G_numerical, G_categorical} named "all", "num", "cat"; empty kinds omitted.
std::vector<FeatureGroup> derive_default_groups(const Dataset& ds);

/// Top-k original columns from a "name<TAB>score" file, split by kind into
/// groups "top_num" and "top_cat" (empty ones omitted).
std::vector<FeatureGroup> groups_from_importance(const Dataset& ds, const std::string& ranking_file,
                                                 std::size_t top_k);
std::vector<FeatureGroup> groups_from_ranking(const Dataset& ds,
                                              std::span<const std::pair<std::string, double>> ranking,
                                              std::size_t top_k);

void validate_group(const Dataset& ds, const FeatureGroup& g);

const char* to_string(GroupKind k);

}  // namespace ruleopt
