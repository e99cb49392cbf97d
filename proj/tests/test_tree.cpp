#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>

#include "relfeat/tree.hpp"
#include "support/oracle.hpp"

using namespace relfeat;

#ifndef RELFEAT_FIXTURE_DIR
#error "RELFEAT_FIXTURE_DIR must be defined"
#endif

namespace {

Database toyshop() {
    return load_database(
        parse_schema_file(std::string(RELFEAT_FIXTURE_DIR) + "/toyshop/toyshop.cfg"));
}

JoiningPath find_path(const Database& db, const RelationalGraph& g,
                      const std::string& canon) {
    for (const auto& p : enumerate_paths(db, g, PathStrategy::All, 3))
        if (p.canon == canon) return p;
    FAIL("path not found: " << canon);
    return {};
}

std::multiset<double> as_multiset(const std::vector<double>& v) {
    return {v.begin(), v.end()};
}

std::vector<Leaf> tree_leaves(const Database& db, const RelationalGraph& g,
                              const RelationalTree& tree, const JoiningPath& path) {
    TreeBuilder builder(db, g, make_time_policy(db), 0);
    return builder.leaves(tree, path);
}

}  // namespace

TEST_CASE("toy-shop price tree: two order nodes, the documented leaves") {
    Database db = toyshop();
    RelationalGraph g = build_graph(db);
    JoiningPath price = find_path(db, g, "user>[UserID]order>[ProductID]product.Price");

    RelationalTree tree = build_tree(db, g, 0, price, std::nullopt);
    REQUIRE(tree.levels.size() == 2);
    REQUIRE(tree.levels[0].size() == 2);  // orders 1 and 4
    REQUIRE(tree.levels[1].size() == 4);

    // leaves {10,20} under the first order, {10,5} under the second
    std::map<int32_t, std::multiset<double>> by_parent;
    const Table& product = db.tables[2];
    int price_col = product.column_index("Price");
    for (const TreeNode& n : tree.levels[1])
        by_parent[n.parent].insert(
            product.rows[static_cast<size_t>(n.row)][static_cast<size_t>(price_col)].num);
    CHECK(by_parent[0] == std::multiset<double>{10, 20});
    CHECK(by_parent[1] == std::multiset<double>{5, 10});

    auto leaves = tree_leaves(db, g, tree, price);
    FlattenedCollection flat = flatten(leaves, ColumnKind::Numeric, false);
    CHECK(flat.variant == CollectionVariant::NumberMultiset);
    CHECK(as_multiset(flat.numbers) == std::multiset<double>{10, 20, 10, 5});
}

TEST_CASE("a user with no orders yields a root-only tree and empty collection") {
    Database db = toyshop();
    // retarget user 2's orders to a nonexistent user
    Table& order = db.tables[1];
    int uid = order.column_index("UserID");
    order.rows[1][static_cast<size_t>(uid)] = Cell::str("99");
    order.rows[2][static_cast<size_t>(uid)] = Cell::str("99");

    RelationalGraph g = build_graph(db);
    JoiningPath price = find_path(db, g, "user>[UserID]order>[ProductID]product.Price");
    RelationalTree tree = build_tree(db, g, 1, price, std::nullopt);
    CHECK(tree.levels[0].empty());
    CHECK(tree.levels[1].empty());
    auto flat = flatten(tree_leaves(db, g, tree, price), ColumnKind::Numeric, false);
    CHECK(flat.variant == CollectionVariant::NumberMultiset);
    CHECK(flat.numbers.empty());
}

TEST_CASE("time source picks the deepest timestamp column and orders leaves") {
    Database db = toyshop();
    RelationalGraph g = build_graph(db);
    JoiningPath price = find_path(db, g, "user>[UserID]order>[ProductID]product.Price");

    TimePolicy policy = make_time_policy(db);
    TimeSource src = path_time_source(db, price, policy);
    REQUIRE(src.exists());
    CHECK(src.depth == 1);  // order.Time

    TreeBuilder builder(db, g, policy, 0);
    RelationalTree tree = builder.build(0, price);
    auto leaves = builder.leaves(tree, price);
    FlattenedCollection ts = flatten(leaves, ColumnKind::Numeric, true);
    REQUIRE(ts.variant == CollectionVariant::Timeseries);
    int64_t t1 = *parse_timestamp("2014-01-02");
    int64_t t4 = *parse_timestamp("2014-03-01");
    CHECK(ts.numbers == std::vector<double>{10, 20, 10, 5});
    CHECK(ts.timestamps == std::vector<int64_t>{t1, t1, t4, t4});
}

TEST_CASE("cutoff below the earliest order empties the tree") {
    Database db = toyshop();
    RelationalGraph g = build_graph(db);
    JoiningPath price = find_path(db, g, "user>[UserID]order>[ProductID]product.Price");
    int64_t before_everything = *parse_timestamp("2013-12-31");
    RelationalTree tree = build_tree(db, g, 0, price, before_everything);
    CHECK(tree.levels[0].empty());
    CHECK(tree.levels[1].empty());
}

TEST_CASE("cutoff keeps exactly the orders at or before it, subtrees included") {
    Database db = toyshop();
    RelationalGraph g = build_graph(db);
    JoiningPath price = find_path(db, g, "user>[UserID]order>[ProductID]product.Price");
    int64_t between = *parse_timestamp("2014-02-01");
    RelationalTree tree = build_tree(db, g, 0, price, between);
    REQUIRE(tree.levels[0].size() == 1);  // only order 1
    CHECK(tree.levels[1].size() == 2);    // its two products

    TreeBuilder builder(db, g, make_time_policy(db), 0);
    auto flat = flatten(builder.leaves(tree, price), ColumnKind::Numeric, false);
    CHECK(as_multiset(flat.numbers) == std::multiset<double>{10, 20});
}

TEST_CASE("cutoff monotonicity: earlier cutoffs harvest a subset of leaves") {
    Database db = toyshop();
    RelationalGraph g = build_graph(db);
    JoiningPath price = find_path(db, g, "user>[UserID]order>[ProductID]product.Price");
    TreeBuilder plain(db, g, make_time_policy(db), 0);

    int64_t base = *parse_timestamp("2014-01-01");
    std::multiset<double> previous;
    for (int days = 0; days < 90; days += 7) {
        RelationalTree tree = build_tree(db, g, 0, price, base + days * 86400);
        auto flat = flatten(plain.leaves(tree, price), ColumnKind::Numeric, false);
        std::multiset<double> current = as_multiset(flat.numbers);
        CHECK(std::includes(current.begin(), current.end(), previous.begin(),
                            previous.end()));
        previous = std::move(current);
    }
}

TEST_CASE("flatten cardinality equals the number of non-null leaves") {
    Database db = toyshop();
    // null a price
    db.tables[2].rows[1][1] = Cell::null();
    RelationalGraph g = build_graph(db);
    JoiningPath price = find_path(db, g, "user>[UserID]order>[ProductID]product.Price");
    TreeBuilder builder(db, g, make_time_policy(db), 0);
    RelationalTree tree = builder.build(0, price);
    auto leaves = builder.leaves(tree, price);
    CHECK(leaves.size() == 3);  // product B's price went null
    auto flat = flatten(leaves, ColumnKind::Numeric, false);
    CHECK(flat.size() == leaves.size());
}

TEST_CASE("flatten dispatches variants by kind and order") {
    std::vector<Leaf> leaves;
    leaves.push_back({Cell::str("red fast"), 5, true});
    leaves.push_back({Cell::str("blue"), 1, true});

    auto seq = flatten(leaves, ColumnKind::Text, true);
    CHECK(seq.variant == CollectionVariant::SymbolSequence);
    CHECK(seq.items == std::vector<std::string>{"blue", "red", "fast"});

    auto bag = flatten(leaves, ColumnKind::Text, false);
    CHECK(bag.variant == CollectionVariant::ItemMultiset);
    CHECK(bag.items == std::vector<std::string>{"red", "fast", "blue"});

    std::vector<Leaf> cats;
    cats.push_back({Cell::str("x"), 0, false});
    auto items = flatten(cats, ColumnKind::Categorical, false);
    CHECK(items.variant == CollectionVariant::ItemMultiset);

    std::vector<Leaf> times;
    times.push_back({Cell::timestamp(100), 100, true});
    auto series = flatten(times, ColumnKind::Timestamp, true);
    CHECK(series.variant == CollectionVariant::TimestampSeries);
    CHECK(series.timestamps == std::vector<int64_t>{100});
}

TEST_CASE("batch and single-example construction agree on random databases") {
    for (uint64_t seed : {11ull, 12ull, 13ull}) {
        Database db = oracle::random_database(seed, 4, 60);
        RelationalGraph g = build_graph(db);
        auto paths = enumerate_paths(db, g, PathStrategy::ForwardOnly, 3);
        TreeBuilder builder(db, g, make_time_policy(db), 0);
        for (const auto& path : paths) {
            const auto& all = builder.build_all(path);
            for (size_t e = 0; e < db.example_count(); ++e) {
                RelationalTree solo = build_tree(db, g, e, path, std::nullopt);
                REQUIRE(solo.levels.size() == all[e].levels.size());
                for (size_t l = 0; l < solo.levels.size(); ++l) {
                    REQUIRE(solo.levels[l].size() == all[e].levels[l].size());
                    for (size_t i = 0; i < solo.levels[l].size(); ++i) {
                        CHECK(solo.levels[l][i].row == all[e].levels[l][i].row);
                        CHECK(solo.levels[l][i].parent == all[e].levels[l][i].parent);
                    }
                }
            }
        }
    }
}

TEST_CASE("multiset flatten equals the nested-loop oracle on random databases") {
    for (uint64_t seed = 100; seed < 110; ++seed) {
        Database db = oracle::random_database(seed, 4, 50);
        RelationalGraph g = build_graph(db);
        auto paths = enumerate_paths(db, g, PathStrategy::ForwardOnly, 3);
        TreeBuilder builder(db, g, make_time_policy(db), 0);
        for (const auto& path : paths) {
            for (size_t e = 0; e < db.example_count(); ++e) {
                RelationalTree tree = builder.build(e, path);
                auto flat = flatten(builder.leaves(tree, path), path.terminal_kind, false);
                auto expected = oracle::nested_loop_values(db, e, path);
                CHECK(as_multiset(flat.numbers) == as_multiset(expected));
            }
        }
    }
}

TEST_CASE("joined-size cap subsamples deterministically") {
    // every main row matches all 40 child rows: 160 joined rows, far over cap
    Database db;
    db.pipeline = PipelineConfig{};
    Table main;
    main.name = "m";
    main.is_main = true;
    main.columns = {{"k", ColumnKind::Key}, {"y", ColumnKind::Target}};
    for (int i = 0; i < 4; ++i)
        main.rows.push_back({Cell::str("k"), Cell::number(0)});
    Table child;
    child.name = "c";
    child.columns = {{"k", ColumnKind::Key}, {"v", ColumnKind::Numeric}};
    for (int i = 0; i < 40; ++i)
        child.rows.push_back({Cell::str("k"), Cell::number(i)});
    db.tables = {main, child};
    db.main_table = 0;
    db.target_column = 1;
    db.foreign_keys.push_back({0, 0, 1, 0, {"m", "k", "c", "k"}});

    RelationalGraph g = build_graph(db);
    auto paths = enumerate_paths(db, g, PathStrategy::ForwardOnly, 1);
    REQUIRE(paths.size() == 1);

    TimePolicy policy = make_time_policy(db);
    TreeBuilder capped_a(db, g, policy, 9, 64);  // 64 cells / 2 cols = 32 rows
    TreeBuilder capped_b(db, g, policy, 9, 64);
    TreeBuilder full(db, g, policy, 9);

    size_t capped_total = 0, full_total = 0;
    for (size_t e = 0; e < db.example_count(); ++e) {
        auto ta = capped_a.build(e, paths[0]);
        auto tb = capped_b.build(e, paths[0]);
        REQUIRE(ta.levels.back().size() == tb.levels.back().size());
        for (size_t i = 0; i < ta.levels.back().size(); ++i)
            CHECK(ta.levels.back()[i].row == tb.levels.back()[i].row);
        capped_total += ta.levels.back().size();
        full_total += full.build(e, paths[0]).levels.back().size();
    }
    CHECK(full_total == 160);
    CHECK(capped_total == 32);
}

TEST_CASE("tree dump golden for toy-shop user 1") {
    Database db = toyshop();
    RelationalGraph g = build_graph(db);
    JoiningPath price = find_path(db, g, "user>[UserID]order>[ProductID]product.Price");
    RelationalTree tree = build_tree(db, g, 0, price, std::nullopt);
    std::string expected =
        "example 0\n"
        "  order row 0\n"
        "    product row 0 -> 10\n"
        "    product row 1 -> 20\n"
        "  order row 3\n"
        "    product row 0 -> 10\n"
        "    product row 2 -> 5\n";
    CHECK(dump_tree(db, tree, price) == expected);
}
