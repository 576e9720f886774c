#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ruleopt/dataset.hpp"

namespace ruleopt {

/// Complete binary tree of depth D, nodes numbered breadth-first from 1.
/// Branch nodes are 1..2^D-1, leaves 2^D..2^(D+1)-1.
class TreeShape {
public:
    explicit TreeShape(int depth);

    int depth() const { return depth_; }
    int num_nodes() const { return (1 << (depth_ + 1)) - 1; }
    int num_branch() const { return (1 << depth_) - 1; }
    int num_leaves() const { return 1 << depth_; }
    int first_leaf() const { return 1 << depth_; }
    int last_leaf() const { return num_nodes(); }

    bool is_branch(int t) const { return t >= 1 && t < first_leaf(); }
    bool is_leaf(int t) const { return t >= first_leaf() && t <= last_leaf(); }

    std::vector<int> branch_nodes() const;
    std::vector<int> leaves() const;

    /// Depth of a node, root at 0.
    static int node_depth(int t);

private:
    int depth_;
};

int parent(int t, const TreeShape& shape);

struct AncestorSplit {
    std::vector<int> left;   // A_L(t)
    std::vector<int> right;  // A_R(t)
};

/// Ancestors whose left (resp. right) branch lies on the path to leaf t, root first.
AncestorSplit ancestors_lr(int t, const TreeShape& shape);

/// E_L(t): every leaf below the left child of branch node t.
std::vector<int> left_descendant_leaves(int t, const TreeShape& shape);

/// E_R(t): the rightmost leaf under each child of branch node t (left child's first).
std::vector<int> rightmost_pair(int t, const TreeShape& shape);

/// All leaves in the subtree rooted at t.
std::vector<int> subtree_leaves(int t, const TreeShape& shape);

/// B(split), B(group), L(target). Arrays are indexed by position within
/// T_B (node t at t-1) and T_L (leaf t at t-2^D).
struct StructureSpec {
    int depth = 1;
    std::vector<bool> split;
    std::vector<std::string> group;
    std::vector<bool> target;

    /// "cat-num" style chain: one group per depth, all split, all targeted.
    static StructureSpec from_chain(const std::vector<std::string>& chain);
    static StructureSpec from_chain(const std::string& chain);

    /// Explicit table:
    ///   depth D
    ///   node <t> split <0|1> group <name>
    ///   leaf <t> target <0|1>
    static StructureSpec parse(const std::string& text);
    static StructureSpec from_file(const std::string& path);
    std::string to_text() const;

    TreeShape shape() const { return TreeShape(depth); }
    bool splits(int t) const { return split[t - 1]; }
    const std::string& group_of(int t) const { return group[t - 1]; }
    bool targets(int leaf) const { return target[leaf - (1 << depth)]; }
};

/// Checks sizes, split consistency (no split below an unsplit node) and that
/// every group name resolves.
void validate_spec(const StructureSpec& spec, const std::vector<FeatureGroup>& groups);

const FeatureGroup& find_group(const std::vector<FeatureGroup>& groups, const std::string& name);

struct NodeFixing {
    int node = 0;
    bool split = false;                 // d_t
    std::string group;
    GroupKind group_kind = GroupKind::custom;
    std::vector<std::size_t> allowed;   // features with a_pt free; splittable members of the group
    std::optional<double> fixed_threshold;  // b_t = 0.5 on categorical split nodes
};

struct BscFixings {
    int depth = 1;
    std::vector<NodeFixing> nodes;  // index t-1
    std::vector<int> targets;       // T_obj, ascending

    const NodeFixing& node(int t) const { return nodes[t - 1]; }
    bool is_target(int leaf) const;
};

BscFixings apply_bsc(const StructureSpec& spec, const TreeShape& shape, const Dataset& ds,
                     const std::vector<FeatureGroup>& groups);

enum class Direction { below, at_or_above };

struct PathStep {
    int node = 0;
    Direction direction = Direction::below;
    std::string group;
};

struct TargetPath {
    int leaf = 0;
    std::vector<PathStep> steps;  // split ancestors only, root first
    bool structurally_empty = false;
};

std::vector<TargetPath> target_paths(const BscFixings& fixings, const TreeShape& shape);

}  // namespace ruleopt
