#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ruleopt/dataset.hpp"
#include "ruleopt/rule.hpp"
#include "ruleopt/topology.hpp"

namespace ruleopt {

enum class VarKind { binary, integer, continuous };

struct Variable {
    std::string name;
    std::string family;  // a, b, d, z, l, c, N, Nk, L, q, I_max
    VarKind kind = VarKind::continuous;
    double lb = 0.0;
    double ub = 0.0;  // +inf when unbounded
};

enum class RowSense { le, ge, eq };

struct Term {
    std::size_t var = 0;
    double coef = 0.0;
};

struct Row {
    std::string name;
    std::string family;
    std::vector<Term> terms;
    RowSense sense = RowSense::le;
    double rhs = 0.0;
};

struct MipMetadata {
    long n = 0;
    long p = 0;
    long k = 0;
    int depth = 1;
    double w = 10.0;
    std::vector<double> epsilon;
    double epsilon_max = 0.0;
    double big_m_loss = 0.0;  // |N|
    double big_m_vi = 0.0;    // w |N|
    std::vector<int> targets;
};

class MipModel {
public:
    const std::vector<Variable>& variables() const { return vars_; }
    const std::vector<Row>& rows() const { return rows_; }
    const std::vector<Term>& objective() const { return objective_; }
    const MipMetadata& meta() const { return meta_; }
    const BscFixings& fixings() const { return fixings_; }

    std::optional<std::size_t> find(const std::string& name) const;
    std::size_t index(const std::string& name) const;  // throws if absent

private:
    friend MipModel build(const Dataset&, const TreeShape&, const BscFixings&, double);
    std::size_t add_var(std::string name, std::string family, VarKind kind, double lb, double ub);
    void add_row(std::string name, std::string family, std::vector<Term> terms, RowSense sense,
                 double rhs);

    std::vector<Variable> vars_;
    std::vector<Row> rows_;
    std::vector<Term> objective_;
    std::unordered_map<std::string, std::size_t> by_name_;
    MipMetadata meta_;
    BscFixings fixings_;
};

/// Full formulation with the BSC fixings applied as variable bounds.
/// Row families: split_on, tree, left_off, rightmost_on, leaf_on, count,
/// assign, left, right, predict, count_k, loss_ge, loss_le, vi_ge, vi_le,
/// select_one, and b_le_d for 0 <= b_t <= d_t.
MipModel build(const Dataset& ds, const TreeShape& shape, const BscFixings& fixings, double w);

struct Census {
    std::map<std::string, long> variables;
    std::map<std::string, long> rows;
    long total_variables() const;
    long total_rows() const;
    bool operator==(const Census&) const = default;
};

Census count_census(long n, long p, long k, int depth, long num_targets);
Census census_of(const MipModel& model);

void write_lp(const MipModel& model, std::ostream& out);
void write_mps(const MipModel& model, std::ostream& out);
void emit_lp(const MipModel& model, const std::string& path);
void emit_mps(const MipModel& model, const std::string& path);

/// Complete assignment, indexed like model.variables().
using Assignment = std::vector<double>;

/// Routes every sample through a tree realizing the rule. Split nodes off the
/// rule's path take their first allowed feature with b = 0 (or the fixed b).
Assignment warmstart_assignment(const MipModel& model, const Rule& rule, const Dataset& ds);
void write_assignment(const MipModel& model, const Assignment& values, std::ostream& out);
void emit_warmstart(const MipModel& model, const Rule& rule, const Dataset& ds,
                    const std::string& path);

/// "name priority": 10 for a and d, 1 for the remaining discrete variables.
void write_priorities(const MipModel& model, std::ostream& out);
void emit_priorities(const MipModel& model, const std::string& path);

struct FeasibilityReport {
    bool feasible = true;
    double max_violation = 0.0;
    std::vector<std::string> violations;  // first few offending rows/bounds
};

FeasibilityReport check_feasibility(const MipModel& model, const Assignment& values,
                                    double tol = 1e-9);

struct ExtractedRule {
    Rule rule;
    double i_max = 0.0;
};

Assignment assignment_from_map(const MipModel& model, const std::map<std::string, double>& values);
/// Reads "name value" lines; names missing from the file are an error.
Assignment read_assignment(const MipModel& model, std::istream& in);

ExtractedRule solution_to_rule(const MipModel& model, const Dataset& ds, const Assignment& values);

}  // namespace ruleopt
