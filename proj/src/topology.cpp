#include "ruleopt/topology.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ruleopt/error.hpp"

namespace ruleopt {

namespace {
constexpr const char* kModule = "topology";

std::string canonical_group(std::string name) {
    if (name == "numerical" || name == "numeric") return "num";
    if (name == "categorical") return "cat";
    if (name == "A" || name == "G_A") return "all";
    return name;
}
}  // namespace

TreeShape::TreeShape(int depth) : depth_(depth) {
    if (depth < 1 || depth > 16) throw Error(kModule, "depth must lie in [1, 16]");
}

std::vector<int> TreeShape::branch_nodes() const {
    std::vector<int> out;
    for (int t = 1; t < first_leaf(); ++t) out.push_back(t);
    return out;
}

std::vector<int> TreeShape::leaves() const {
    std::vector<int> out;
    for (int t = first_leaf(); t <= last_leaf(); ++t) out.push_back(t);
    return out;
}

int TreeShape::node_depth(int t) {
    int d = 0;
    while (t > 1) {
        t /= 2;
        ++d;
    }
    return d;
}

int parent(int t, const TreeShape& shape) {
    if (t == 1) throw Error(kModule, "the root has no parent");
    if (t < 1 || t > shape.num_nodes()) throw Error(kModule, "node index out of range");
    return t / 2;
}

AncestorSplit ancestors_lr(int t, const TreeShape& shape) {
    if (!shape.is_leaf(t)) throw Error(kModule, "ancestors_lr expects a leaf");
    AncestorSplit out;
    for (int child = t; child > 1; child /= 2) {
        int a = child / 2;
        (child % 2 == 0 ? out.left : out.right).push_back(a);
    }
    std::reverse(out.left.begin(), out.left.end());
    std::reverse(out.right.begin(), out.right.end());
    return out;
}

std::vector<int> subtree_leaves(int t, const TreeShape& shape) {
    if (t < 1 || t > shape.num_nodes()) throw Error(kModule, "node index out of range");
    int lo = t, hi = t;
    while (lo < shape.first_leaf()) {
        lo = 2 * lo;
        hi = 2 * hi + 1;
    }
    std::vector<int> out;
    for (int s = lo; s <= hi; ++s) out.push_back(s);
    return out;
}

std::vector<int> left_descendant_leaves(int t, const TreeShape& shape) {
    if (!shape.is_branch(t)) throw Error(kModule, "E_L expects a branch node");
    return subtree_leaves(2 * t, shape);
}

std::vector<int> rightmost_pair(int t, const TreeShape& shape) {
    if (!shape.is_branch(t)) throw Error(kModule, "E_R expects a branch node");
    return {subtree_leaves(2 * t, shape).back(), subtree_leaves(2 * t + 1, shape).back()};
}

StructureSpec StructureSpec::from_chain(const std::vector<std::string>& chain) {
    if (chain.empty()) throw Error(kModule, "empty structure chain");
    StructureSpec spec;
    spec.depth = static_cast<int>(chain.size());
    TreeShape shape(spec.depth);
    spec.split.assign(shape.num_branch(), true);
    spec.target.assign(shape.num_leaves(), true);
    for (int t : shape.branch_nodes()) spec.group.push_back(canonical_group(chain[TreeShape::node_depth(t)]));
    return spec;
}

StructureSpec StructureSpec::from_chain(const std::string& chain) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : chain) {
        if (c == '-') {
            if (!cur.empty()) parts.push_back(cur);
            cur.clear();
        } else if (c != '{' && c != '}' && c != ' ') {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) parts.push_back(cur);
    return from_chain(parts);
}

StructureSpec StructureSpec::parse(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    StructureSpec spec;
    bool have_depth = false;
    std::vector<bool> seen_node, seen_leaf;
    auto fail = [&](const std::string& msg) {
        throw Error(kModule, "structure line " + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        std::istringstream ss(line);
        std::string word;
        if (!(ss >> word)) continue;
        if (word == "depth") {
            if (!(ss >> spec.depth)) fail("bad depth");
            TreeShape shape(spec.depth);
            spec.split.assign(shape.num_branch(), false);
            spec.group.assign(shape.num_branch(), "");
            spec.target.assign(shape.num_leaves(), false);
            seen_node.assign(shape.num_branch(), false);
            seen_leaf.assign(shape.num_leaves(), false);
            have_depth = true;
        } else if (word == "node") {
            if (!have_depth) fail("'depth' must come first");
            int t = 0, s = 0;
            std::string kw1, kw2, g;
            if (!(ss >> t >> kw1 >> s >> kw2 >> g) || kw1 != "split" || kw2 != "group")
                fail("expected 'node <t> split <0|1> group <name>'");
            if (t < 1 || t > static_cast<int>(spec.split.size())) fail("branch node out of range");
            spec.split[t - 1] = s != 0;
            spec.group[t - 1] = canonical_group(g);
            seen_node[t - 1] = true;
        } else if (word == "leaf") {
            if (!have_depth) fail("'depth' must come first");
            int t = 0, v = 0;
            std::string kw;
            if (!(ss >> t >> kw >> v) || kw != "target") fail("expected 'leaf <t> target <0|1>'");
            int first = 1 << spec.depth;
            if (t < first || t >= 2 * first) fail("leaf out of range");
            spec.target[t - first] = v != 0;
            seen_leaf[t - first] = true;
        } else {
            fail("unknown keyword '" + word + "'");
        }
    }
    if (!have_depth) throw Error(kModule, "structure table has no depth line");
    for (std::size_t i = 0; i < seen_node.size(); ++i)
        if (!seen_node[i]) throw Error(kModule, "branch node " + std::to_string(i + 1) + " not declared");
    for (std::size_t i = 0; i < seen_leaf.size(); ++i)
        if (!seen_leaf[i])
            throw Error(kModule, "leaf " + std::to_string(i + (1u << spec.depth)) + " not declared");
    return spec;
}

StructureSpec StructureSpec::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(kModule, "cannot open structure file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::string StructureSpec::to_text() const {
    std::ostringstream out;
    out << "depth " << depth << "\n";
    for (std::size_t i = 0; i < split.size(); ++i)
        out << "node " << i + 1 << " split " << (split[i] ? 1 : 0) << " group " << group[i] << "\n";
    for (std::size_t i = 0; i < target.size(); ++i)
        out << "leaf " << i + (1u << depth) << " target " << (target[i] ? 1 : 0) << "\n";
    return out.str();
}

const FeatureGroup& find_group(const std::vector<FeatureGroup>& groups, const std::string& name) {
    for (const auto& g : groups)
        if (g.name == name) return g;
    throw Error(kModule, "unknown feature group '" + name + "'");
}

void validate_spec(const StructureSpec& spec, const std::vector<FeatureGroup>& groups) {
    TreeShape shape(spec.depth);
    if (spec.split.size() != static_cast<std::size_t>(shape.num_branch()) ||
        spec.group.size() != static_cast<std::size_t>(shape.num_branch()))
        throw Error(kModule, "B(split)/B(group) must have one entry per branch node");
    if (spec.target.size() != static_cast<std::size_t>(shape.num_leaves()))
        throw Error(kModule, "L(target) must have one entry per leaf");
    for (int t = 2; t < shape.first_leaf(); ++t) {
        if (spec.splits(t) && !spec.splits(t / 2))
            throw Error(kModule, "node " + std::to_string(t) + " splits below unsplit node " +
                                     std::to_string(t / 2));
    }
    for (int t : shape.branch_nodes()) find_group(groups, spec.group_of(t));
}

bool BscFixings::is_target(int leaf) const {
    return std::binary_search(targets.begin(), targets.end(), leaf);
}

BscFixings apply_bsc(const StructureSpec& spec, const TreeShape& shape, const Dataset& ds,
                     const std::vector<FeatureGroup>& groups) {
    if (spec.depth != shape.depth()) throw Error(kModule, "structure depth does not match tree depth");
    validate_spec(spec, groups);
    BscFixings fx;
    fx.depth = shape.depth();
    for (int t : shape.branch_nodes()) {
        const auto& g = find_group(groups, spec.group_of(t));
        validate_group(ds, g);
        NodeFixing nf;
        nf.node = t;
        nf.split = spec.splits(t);
        nf.group = g.name;
        nf.group_kind = g.kind;
        for (auto p : g.members)
            if (ds.feature(p).splittable()) nf.allowed.push_back(p);
        std::sort(nf.allowed.begin(), nf.allowed.end());
        if (nf.split && nf.allowed.empty())
            throw Error(kModule, "node " + std::to_string(t) + " must split but group '" + g.name +
                                     "' has no splittable feature");
        // b_t <= d_t, so the categorical fixing only applies to split nodes.
        if (nf.split && g.kind == GroupKind::categorical) nf.fixed_threshold = 0.5;
        fx.nodes.push_back(std::move(nf));
    }
    for (int leaf : shape.leaves())
        if (spec.targets(leaf)) fx.targets.push_back(leaf);
    if (fx.targets.empty()) throw Error(kModule, "empty T_obj: no leaf is targeted");
    return fx;
}

std::vector<TargetPath> target_paths(const BscFixings& fixings, const TreeShape& shape) {
    if (fixings.depth != shape.depth()) throw Error(kModule, "fixings do not match the tree depth");
    std::vector<TargetPath> out;
    for (int leaf : fixings.targets) {
        TargetPath path;
        path.leaf = leaf;
        std::vector<int> nodes;
        for (int child = leaf; child > 1; child /= 2) nodes.push_back(child);
        std::reverse(nodes.begin(), nodes.end());
        for (int child : nodes) {
            int a = child / 2;
            bool left = child % 2 == 0;
            const auto& nf = fixings.node(a);
            if (!nf.split) {
                // An unsplit node sends everything to its rightmost leaf.
                if (left) path.structurally_empty = true;
                continue;
            }
            path.steps.push_back({a, left ? Direction::below : Direction::at_or_above, nf.group});
        }
        if (path.structurally_empty) path.steps.clear();
        out.push_back(std::move(path));
    }
    return out;
}

}  // namespace ruleopt
