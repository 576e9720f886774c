#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "ruleopt/error.hpp"
#include "ruleopt/exact_search.hpp"
#include "ruleopt/topology.hpp"

using namespace ruleopt;
using V = std::vector<int>;

TEST_CASE("tree shape sizes") {
    for (int d = 1; d <= 5; ++d) {
        TreeShape s(d);
        CHECK(s.num_nodes() == (1 << (d + 1)) - 1);
        CHECK(s.num_leaves() == 1 << d);
        CHECK(s.num_branch() == (1 << d) - 1);
        CHECK(s.branch_nodes().back() + 1 == s.leaves().front());
    }
    CHECK_THROWS_AS(TreeShape(0), Error);
}

TEST_CASE("parent") {
    TreeShape s(2);
    CHECK(parent(5, s) == 2);
    CHECK(parent(7, s) == 3);
    CHECK_THROWS_AS(parent(1, s), Error);
}

TEST_CASE("ancestors_lr") {
    TreeShape s(2);
    auto a4 = ancestors_lr(4, s);
    CHECK(a4.left == V{1, 2});
    CHECK(a4.right.empty());
    auto a7 = ancestors_lr(7, s);
    CHECK(a7.left.empty());
    CHECK(a7.right == V{1, 3});
    auto a5 = ancestors_lr(5, s);
    CHECK(a5.left == V{1});
    CHECK(a5.right == V{2});
    for (int d = 1; d <= 4; ++d) {
        TreeShape sd(d);
        for (int t : sd.leaves()) {
            auto a = ancestors_lr(t, sd);
            CHECK(static_cast<int>(a.left.size() + a.right.size()) == d);
        }
    }
}

TEST_CASE("left descendant leaves") {
    CHECK(left_descendant_leaves(1, TreeShape(2)) == V{4, 5});
    CHECK(left_descendant_leaves(2, TreeShape(2)) == V{4});
    CHECK(left_descendant_leaves(1, TreeShape(1)) == V{2});
    TreeShape s(4);
    for (int t : s.branch_nodes()) {
        int below = s.depth() - TreeShape::node_depth(t) - 1;
        CHECK(left_descendant_leaves(t, s).size() == (1u << below));
    }
}

TEST_CASE("rightmost pair") {
    CHECK(rightmost_pair(1, TreeShape(2)) == V{5, 7});
    CHECK(rightmost_pair(3, TreeShape(2)) == V{6, 7});
    CHECK(rightmost_pair(1, TreeShape(1)) == V{2, 3});
    TreeShape s(4);
    for (int t : s.branch_nodes()) CHECK(rightmost_pair(t, s).size() == 2);
}

TEST_CASE("structure chains and tables") {
    auto spec = StructureSpec::from_chain("cat-num");
    CHECK(spec.depth == 2);
    CHECK(spec.group == std::vector<std::string>{"cat", "num", "num"});
    CHECK(spec.split == std::vector<bool>{true, true, true});
    CHECK(spec.target == std::vector<bool>(4, true));

    auto round = StructureSpec::parse(spec.to_text());
    CHECK(round.depth == spec.depth);
    CHECK(round.group == spec.group);
    CHECK(round.split == spec.split);
    CHECK(round.target == spec.target);

    CHECK_THROWS_AS(StructureSpec::parse("depth 1\nleaf 2 target 1\nleaf 3 target 1\n"), Error);
    CHECK_THROWS_AS(StructureSpec::from_chain(""), Error);
}

TEST_CASE("validate_spec rejects a split below an unsplit node") {
    auto ds = fixtures::matrix({{0.0}, {1.0}}, {0, 1});
    auto groups = derive_default_groups(ds);
    auto spec = StructureSpec::from_chain("all-all-all");
    spec.split = {true, false, true, true, false, false, false};  // node 4 under unsplit node 2
    CHECK_THROWS_AS(validate_spec(spec, groups), Error);
    spec = StructureSpec::from_chain("all-nope");
    CHECK_THROWS_AS(validate_spec(spec, groups), Error);
}

TEST_CASE("apply_bsc on a categorical root") {
    auto ds = fixtures::matrix({{1, 0, 0.0}, {0, 1, 1.0}}, {0, 1},
                               {FeatureKind::onehot, FeatureKind::onehot, FeatureKind::numerical});
    auto groups = derive_default_groups(ds);
    auto spec = StructureSpec::from_chain("cat");
    auto fx = apply_bsc(spec, spec.shape(), ds, groups);
    CHECK(fx.node(1).split);
    REQUIRE(fx.node(1).fixed_threshold.has_value());
    CHECK(*fx.node(1).fixed_threshold == 0.5);
    CHECK(fx.node(1).allowed == std::vector<std::size_t>{0, 1});
    CHECK(fx.targets == V{2, 3});

    auto again = apply_bsc(spec, spec.shape(), ds, groups);
    CHECK(again.targets == fx.targets);
    CHECK(again.node(1).allowed == fx.node(1).allowed);
}

TEST_CASE("apply_bsc fixes unsplit nodes") {
    auto ds = fixtures::matrix({{0.0}, {1.0}}, {0, 1});
    auto groups = derive_default_groups(ds);
    auto spec = StructureSpec::from_chain("all-all");
    spec.split = {true, false, false};
    auto fx = apply_bsc(spec, spec.shape(), ds, groups);
    CHECK_FALSE(fx.node(2).split);
    CHECK_FALSE(fx.node(3).split);
    CHECK_FALSE(fx.node(2).fixed_threshold.has_value());

    spec.target.assign(4, false);
    CHECK_THROWS_WITH_AS(apply_bsc(spec, spec.shape(), ds, groups), doctest::Contains("empty T_obj"),
                         Error);
}

TEST_CASE("apply_bsc rejects a split node with no splittable feature") {
    auto ds = fixtures::matrix({{0.3, 0.0}, {0.3, 1.0}}, {0, 1});
    std::vector<FeatureGroup> groups{{"only_const", {0}, GroupKind::custom}};
    StructureSpec spec;
    spec.depth = 1;
    spec.split = {true};
    spec.group = {"only_const"};
    spec.target = {true, true};
    CHECK_THROWS_AS(apply_bsc(spec, spec.shape(), ds, groups), Error);
}

TEST_CASE("target paths") {
    auto ds = fixtures::matrix({{0.0}, {1.0}}, {0, 1});
    auto groups = derive_default_groups(ds);
    auto spec = StructureSpec::from_chain("all-num");
    TreeShape shape = spec.shape();
    auto paths = target_paths(apply_bsc(spec, shape, ds, groups), shape);
    REQUIRE(paths.size() == 4);
    const auto& p7 = paths.back();
    CHECK(p7.leaf == 7);
    REQUIRE(p7.steps.size() == 2);
    CHECK(p7.steps[0].node == 1);
    CHECK(p7.steps[0].direction == Direction::at_or_above);
    CHECK(p7.steps[0].group == "all");
    CHECK(p7.steps[1].node == 3);
    CHECK(p7.steps[1].direction == Direction::at_or_above);
    CHECK(p7.steps[1].group == "num");

    spec.split = {true, true, false};
    auto partial = target_paths(apply_bsc(spec, shape, ds, groups), shape);
    REQUIRE(partial.size() == 4);
    CHECK(partial[2].leaf == 6);
    CHECK(partial[2].structurally_empty);
    CHECK(partial[3].leaf == 7);
    CHECK_FALSE(partial[3].structurally_empty);
    REQUIRE(partial[3].steps.size() == 1);
    CHECK(partial[3].steps[0].node == 1);
    CHECK(partial[3].steps[0].direction == Direction::at_or_above);
}

TEST_CASE("target leaves receive disjoint sample sets under any concrete splits") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 40; ++rep) {
        auto inst = fixtures::random_instance(rng, 30, 4, 3, {10});
        TreeShape shape = inst.shape();
        // Pick a concrete split at every split node.
        std::vector<Condition> split_at(shape.num_branch() + 1);
        for (int t : shape.branch_nodes()) {
            const auto& nf = inst.fixings.node(t);
            if (!nf.split) continue;
            auto f = nf.allowed[rng() % nf.allowed.size()];
            auto th = admissible_thresholds(inst.ds, f, nf);
            split_at[t] = {f, Direction::below, th[rng() % th.size()], inst.ds.epsilon(f)};
        }
        // Reference routing: unsplit nodes send everything right.
        auto route = [&](std::span<const double> x) {
            int t = 1;
            while (shape.is_branch(t)) {
                bool left = inst.fixings.node(t).split && split_at[t].fires(x[split_at[t].feature]);
                t = 2 * t + (left ? 0 : 1);
            }
            return t;
        };
        auto paths = target_paths(inst.fixings, shape);
        for (std::size_t i = 0; i < inst.ds.num_samples(); ++i) {
            auto x = inst.ds.row(i);
            int hits = 0;
            for (const auto& path : paths) {
                bool fired = !path.structurally_empty;
                for (const auto& step : path.steps) {
                    Condition c = split_at[step.node];
                    c.direction = step.direction;
                    fired = fired && c.fires(x[c.feature]);
                }
                if (fired) {
                    ++hits;
                    CHECK(route(x) == path.leaf);
                }
            }
            CHECK(hits <= 1);
            if (inst.fixings.is_target(route(x))) CHECK(hits == 1);
        }
    }
}
