#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "fixtures.hpp"
#include "ruleopt/error.hpp"
#include "ruleopt/rule.hpp"

using namespace ruleopt;

namespace {

// Rule firing on the top `count` rows of the sensitivity fixture.
Rule top_rows(const Dataset& ds, int count) {
    Rule r;
    r.conditions.push_back({0, Direction::at_or_above, (63.5 - count) / 63.0, ds.epsilon(0)});
    return r;
}

}  // namespace

TEST_CASE("conditions fire with the epsilon-adjusted left test") {
    Condition above{0, Direction::at_or_above, 0.5, 0.1};
    CHECK(above.fires(0.7));
    CHECK(above.fires(0.5));
    CHECK_FALSE(above.fires(0.45));
    Condition below{0, Direction::below, 0.5, 0.1};
    CHECK_FALSE(below.fires(0.45));
    CHECK(below.fires(0.4));
    Rule empty;
    std::vector<double> x{0.3, 0.9};
    CHECK(empty.fires(x));
}

TEST_CASE("firing does not depend on condition order") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 1);
    for (int rep = 0; rep < 200; ++rep) {
        Rule r;
        for (std::size_t f = 0; f < 3; ++f)
            r.conditions.push_back({f, rng() % 2 ? Direction::below : Direction::at_or_above, u(rng), 0.05});
        Rule rev = r;
        std::reverse(rev.conditions.begin(), rev.conditions.end());
        std::vector<double> x{u(rng), u(rng), u(rng)};
        CHECK(r.fires(x) == rev.fires(x));
    }
}

TEST_CASE("vi_index on known counts") {
    std::vector<long> c1{1, 45}, c2{0, 38}, c3{6, 53};
    auto r1 = vi_index(c1, 8);
    CHECK(r1.misclassified == 1);
    CHECK(r1.vi == 38);
    CHECK(r1.label == 1);
    auto r2 = vi_index(c2, 10);
    CHECK(r2.misclassified == 0);
    CHECK(r2.vi == 38);
    auto r3 = vi_index(c3, 2);
    CHECK(r3.misclassified == 6);
    CHECK(r3.vi == 47);
}

TEST_CASE("vi_index ties go to the smallest label") {
    std::vector<long> c{3, 3, 1};
    auto r = vi_index(c, 2);
    CHECK(r.label == 0);
    CHECK(r.majority == 3);
    CHECK(r.misclassified == 4);
    CHECK(r.vi == 7 - 8);
    CHECK_THROWS_AS(vi_index(c, 0.5), Error);
}

TEST_CASE("vi_index matches recomputation and is monotone") {
    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 500; ++rep) {
        std::vector<long> c(2 + rng() % 3);
        for (auto& v : c) v = static_cast<long>(rng() % 20);
        double w = 1.0 + static_cast<double>(rng() % 10);
        auto r = vi_index(c, w);
        long n = 0, m = 0;
        for (long v : c) {
            n += v;
            m = std::max(m, v);
        }
        CHECK(r.majority == m);
        CHECK(r.misclassified == n - m);
        CHECK(r.vi == n - w * (n - m));

        // One more correctly labelled sample adds exactly 1.
        auto more = c;
        ++more[r.label];
        CHECK(vi_index(more, w).vi == r.vi + 1);
        // One more sample of another label changes I by 1 - w when the majority holds.
        auto wrong = c;
        std::size_t other = r.label == 0 ? 1 : 0;
        ++wrong[other];
        auto rw = vi_index(wrong, w);
        if (rw.label == r.label) CHECK(rw.vi == r.vi + 1 - w);
        CHECK(rw.vi <= r.vi + 1);

        // Non-increasing in w, strictly when L > 0.
        auto heavier = vi_index(c, w + 1);
        if (r.misclassified > 0)
            CHECK(heavier.vi < r.vi);
        else
            CHECK(heavier.vi == r.vi);
    }
}

TEST_CASE("evaluate on the sensitivity fixture") {
    auto ds = fixtures::sensitivity();
    auto s = evaluate(top_rows(ds, 59), ds, 2);
    CHECK(s.fired == 59);
    CHECK(s.correct == 53);
    CHECK(s.vi == 47);
    CHECK(format_ratio(s.correct, s.fired) == "0.898 (53/59)");
    CHECK(format_ratio(s.fired, s.total) == "0.922 (59/64)");

    auto s10 = evaluate(top_rows(ds, 38), ds, 10);
    CHECK(format_ratio(s10.correct, s10.fired) == "1.000 (38/38)");
    CHECK(s10.vi == 38);
}

TEST_CASE("evaluate edge cases") {
    auto ds = fixtures::matrix({{0.2}, {0.8}}, {0, 1});
    Rule none;
    none.conditions.push_back({0, Direction::below, 0.0, ds.epsilon(0)});
    auto s = evaluate(none, ds, 10);
    CHECK(s.fired == 0);
    CHECK(s.zero_fired);
    CHECK(s.coverage == 0.0);
    CHECK(s.vi == 0.0);
    CHECK(s.precision == 1.0);

    auto one = fixtures::matrix({{0.5}}, {1});
    Rule all;
    auto s1 = evaluate(all, one, 10);
    CHECK(s1.fired == 1);
    CHECK(s1.precision == 1.0);
    CHECK(s1.vi == 1.0);
}

TEST_CASE("evaluate keeps a fixed label") {
    auto ds = fixtures::matrix({{0.0}, {0.5}, {1.0}}, {0, 0, 1});
    Rule r;
    r.label = 1;
    auto s = evaluate(r, ds, 10);
    CHECK(s.label == 1);
    CHECK(s.correct == 1);
    CHECK(s.misclassified == 2);
    CHECK(s.vi == 3 - 20);
    long sum = 0;
    for (long c : s.per_label) sum += c;
    CHECK(sum == s.fired);
}

TEST_CASE("rule files round-trip in original units") {
    auto raw = parse_table(fixtures::planted_csv(80, 4), [] {
        Schema s;
        s.target = "label";
        s.kinds["color"] = ColumnKind::categorical;
        return s;
    }());
    auto ds = preprocess(raw);
    auto age = *ds.find_feature("age");
    auto red = *ds.find_feature("color=red");
    Rule r;
    r.conditions.push_back({age, Direction::at_or_above, ds.feature(age).normalize(39.5), ds.epsilon(age)});
    r.conditions.push_back({red, Direction::at_or_above, 0.5, ds.epsilon(red)});
    r.label = *ds.find_label("yes");
    r.provenance = Provenance::exact;
    r.leaf = 7;

    auto text = describe(r, ds);
    CHECK(text == "age >= 39.5 AND color == red => yes");

    auto path = (std::filesystem::temp_directory_path() / "ruleopt_rule.json").string();
    save_rule(path, r, ds, evaluate(r, ds, 10));
    auto back = load_rule(path, ds);
    REQUIRE(back.conditions.size() == 2);
    CHECK(back.label == r.label);
    CHECK(back.provenance == Provenance::exact);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back.conditions[i].feature == r.conditions[i].feature);
        CHECK(back.conditions[i].direction == r.conditions[i].direction);
        CHECK(back.conditions[i].threshold == doctest::Approx(r.conditions[i].threshold));
    }
    auto a = evaluate(r, ds, 10), b = evaluate(back, ds, 10);
    CHECK(a.fired == b.fired);
    CHECK(a.vi == b.vi);

    auto j = rule_to_json(r, ds);
    j["conditions"][0]["feature"] = "height";
    CHECK_THROWS_WITH_AS(rule_from_json(j, ds), doctest::Contains("unknown feature"), Error);
}
