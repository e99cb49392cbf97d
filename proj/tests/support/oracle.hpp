#pragma once

// Test-only reference implementations: naive nested-loop joins, direct
// statistics, a graph-side Hamiltonian search and a random database
// generator. These stay independent of the code paths they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "relfeat/database.hpp"
#include "relfeat/paths.hpp"

namespace oracle {

inline std::vector<std::string> split_tokens(const std::string& raw) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : raw) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (c != ' ' && c != '\t') {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// Number of matching token pairs between two key cells (join multiplicity).
inline int key_match_count(const relfeat::Cell& a, const relfeat::Cell& b) {
    if (a.is_null() || b.is_null()) return 0;
    int count = 0;
    for (const auto& ta : split_tokens(a.text))
        for (const auto& tb : split_tokens(b.text))
            if (ta == tb) ++count;
    return count;
}

// Multiset of terminal values for one example by brute-force nested loops
// along the path. Null terminals are skipped.
inline std::vector<double> nested_loop_values(const relfeat::Database& db,
                                              size_t example_row,
                                              const relfeat::JoiningPath& path) {
    std::vector<double> out;
    struct Frame {
        int table;
        size_t row;
    };
    std::vector<Frame> stack;

    std::function<void(int, int, size_t)> descend = [&](int hop, int table, size_t row) {
        if (hop == static_cast<int>(path.hops.size())) {
            const relfeat::Cell& v =
                db.tables[static_cast<size_t>(table)]
                    .rows[row][static_cast<size_t>(path.terminal_column)];
            if (v.type == relfeat::ValueType::Number) out.push_back(v.num);
            else if (v.type == relfeat::ValueType::Time)
                out.push_back(static_cast<double>(v.time));
            return;
        }
        const relfeat::PathHop& h = path.hops[static_cast<size_t>(hop)];
        const relfeat::Table& from = db.tables[static_cast<size_t>(table)];
        const relfeat::Table& to = db.tables[static_cast<size_t>(h.to_table)];
        const relfeat::Cell& key = from.rows[row][static_cast<size_t>(h.from_col)];
        for (size_t r = 0; r < to.rows.size(); ++r) {
            int mult = key_match_count(key, to.rows[r][static_cast<size_t>(h.to_col)]);
            for (int k = 0; k < mult; ++k) descend(hop + 1, h.to_table, r);
        }
    };
    descend(0, db.main_table, example_row);
    return out;
}

struct Stats {
    double count, sum, min, max, avg, variance;
};

inline Stats direct_stats(std::vector<double> values) {
    Stats s{0, 0, 0, 0, 0, 0};
    s.count = static_cast<double>(values.size());
    if (values.empty()) return s;
    std::sort(values.begin(), values.end());
    s.min = values.front();
    s.max = values.back();
    for (double v : values) s.sum += v;
    s.avg = s.sum / s.count;
    for (double v : values) s.variance += (v - s.avg) * (v - s.avg);
    s.variance /= s.count;
    return s;
}

// Graph-side Hamiltonian-cycle search, written against the adjacency set
// directly (never touches the reduction database).
inline bool hamiltonian_by_permutations(const relfeat::UndirectedGraph& g) {
    if (g.n < 3) return false;
    std::set<std::pair<int, int>> adj;
    for (auto [a, b] : g.edges) {
        adj.emplace(std::min(a, b), std::max(a, b));
    }
    auto connected = [&](int a, int b) {
        return adj.count({std::min(a, b), std::max(a, b)}) > 0;
    };
    std::vector<int> rest;
    for (int i = 1; i < g.n; ++i) rest.push_back(i);
    do {
        bool ok = connected(0, rest.front()) && connected(rest.back(), 0);
        for (size_t i = 0; ok && i + 1 < rest.size(); ++i)
            ok = connected(rest[i], rest[i + 1]);
        if (ok) return true;
    } while (std::next_permutation(rest.begin(), rest.end()));
    return false;
}

inline relfeat::UndirectedGraph random_connected_graph(std::mt19937_64& rng,
                                                       int min_n = 3, int max_n = 8) {
    while (true) {
        std::uniform_int_distribution<int> n_dist(min_n, max_n);
        int n = n_dist(rng);
        relfeat::UndirectedGraph g;
        g.n = n;
        std::uniform_real_distribution<double> p_dist(0.15, 0.95);
        double p = p_dist(rng);
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (coin(rng) < p) g.edges.emplace_back(i, j);

        std::vector<int> seen(static_cast<size_t>(n), 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (auto [a, b] : g.edges) {
                int v = a == u ? b : (b == u ? a : -1);
                if (v >= 0 && !seen[static_cast<size_t>(v)]) {
                    seen[static_cast<size_t>(v)] = 1;
                    stack.push_back(v);
                }
            }
        }
        if (std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }))
            return g;
    }
}

// Random multi-table database with integer-valued numeric columns and
// fan-out joins; the structure is a random tree of tables rooted at main.
inline relfeat::Database random_database(uint64_t seed, int max_tables = 5,
                                         int max_rows = 120) {
    using namespace relfeat;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> table_dist(2, max_tables);
    const int n_tables = table_dist(rng);

    Database db;
    db.pipeline = PipelineConfig{};
    db.pipeline.seed = seed;

    std::uniform_int_distribution<int> rows_dist(15, max_rows);
    std::uniform_int_distribution<int> key_dist(0, 25);
    std::uniform_int_distribution<int> value_dist(-50, 50);
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    std::vector<int> parent_of(static_cast<size_t>(n_tables), -1);
    for (int t = 1; t < n_tables; ++t) {
        std::uniform_int_distribution<int> pick(0, t - 1);
        parent_of[static_cast<size_t>(t)] = pick(rng);
    }

    for (int t = 0; t < n_tables; ++t) {
        Table table;
        table.name = "t" + std::to_string(t);
        table.is_main = t == 0;
        // key to the parent (and a key other children may reference)
        ColumnDef link{"link" + std::to_string(t), ColumnKind::Key};
        table.columns.push_back(link);
        ColumnDef value{"val" + std::to_string(t), ColumnKind::Numeric};
        table.columns.push_back(value);
        if (t == 0) table.columns.push_back({"label", ColumnKind::Target});

        int rows = t == 0 ? std::max(8, rows_dist(rng) / 4) : rows_dist(rng);
        for (int r = 0; r < rows; ++r) {
            std::vector<Cell> row;
            row.push_back(Cell::str(std::to_string(key_dist(rng))));
            if (coin(rng) < 0.05) row.push_back(Cell::null());
            else row.push_back(Cell::number(static_cast<double>(value_dist(rng))));
            if (t == 0) row.push_back(Cell::number(coin(rng) < 0.5 ? 0.0 : 1.0));
            table.rows.push_back(std::move(row));
        }
        db.tables.push_back(std::move(table));
    }
    db.main_table = 0;
    db.target_column = 2;

    for (int t = 1; t < n_tables; ++t) {
        int p = parent_of[static_cast<size_t>(t)];
        ResolvedForeignKey fk;
        fk.from_table = p;
        fk.from_col = 0;
        fk.to_table = t;
        fk.to_col = 0;
        fk.decl = ForeignKey{db.tables[static_cast<size_t>(p)].name, "link" + std::to_string(p),
                             db.tables[static_cast<size_t>(t)].name, "link" + std::to_string(t)};
        db.foreign_keys.push_back(fk);
    }
    return db;
}

// Central finite differences of a scalar function of one coordinate.
template <typename F>
double central_difference(F&& f, double* coordinate, double eps = 1e-4) {
    double saved = *coordinate;
    *coordinate = saved + eps;
    double up = f();
    *coordinate = saved - eps;
    double down = f();
    *coordinate = saved;
    return (up - down) / (2.0 * eps);
}

// Loyalty fixture: the label is a deterministic threshold on the total
// purchased price. Order counts are constant per user and the non-price
// columns (a per-order note value, user age) are independent noise, so
// ablating the price-derived features must leave a chance-level problem.
inline relfeat::Database loyalty_database(size_t users, uint64_t seed,
                                          int orders_per_user = 6,
                                          int products = 40) {
    using namespace relfeat;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> price_dist(1, 100);
    std::uniform_int_distribution<int> noise_dist(1, 100);
    std::uniform_int_distribution<int> age_dist(18, 80);
    std::uniform_int_distribution<int> product_pick(0, products - 1);

    std::vector<int> price(static_cast<size_t>(products));
    for (int p = 0; p < products; ++p) price[static_cast<size_t>(p)] = price_dist(rng);

    std::vector<std::vector<int>> basket(users);
    std::vector<double> total(users, 0.0);
    for (size_t u = 0; u < users; ++u) {
        for (int o = 0; o < orders_per_user; ++o) {
            int p = product_pick(rng);
            basket[u].push_back(p);
            total[u] += price[static_cast<size_t>(p)];
        }
    }
    std::vector<double> sorted_total = total;
    std::sort(sorted_total.begin(), sorted_total.end());
    double threshold = sorted_total[users / 2];

    Database db;
    db.pipeline = PipelineConfig{};
    db.pipeline.seed = seed;

    Table user;
    user.name = "user";
    user.is_main = true;
    user.columns = {{"UserID", ColumnKind::Key},
                    {"Age", ColumnKind::Numeric},
                    {"Loyal", ColumnKind::Target}};
    for (size_t u = 0; u < users; ++u)
        user.rows.push_back({Cell::str(std::to_string(u)),
                             Cell::number(age_dist(rng)),
                             Cell::number(total[u] > threshold ? 1.0 : 0.0)});

    Table order;
    order.name = "order";
    order.columns = {{"UserID", ColumnKind::Key},
                     {"ProductID", ColumnKind::Key},
                     {"Note", ColumnKind::Numeric}};
    for (size_t u = 0; u < users; ++u)
        for (int p : basket[u])
            order.rows.push_back({Cell::str(std::to_string(u)),
                                  Cell::str(std::to_string(p)),
                                  Cell::number(noise_dist(rng))});

    Table product;
    product.name = "product";
    product.columns = {{"ProductID", ColumnKind::Key}, {"Price", ColumnKind::Numeric}};
    for (int p = 0; p < products; ++p)
        product.rows.push_back({Cell::str(std::to_string(p)),
                                Cell::number(price[static_cast<size_t>(p)])});

    db.tables = {user, order, product};
    db.main_table = 0;
    db.target_column = 2;
    db.foreign_keys.push_back({1, 0, 0, 0, {"order", "UserID", "user", "UserID"}});
    db.foreign_keys.push_back({1, 1, 2, 0, {"order", "ProductID", "product", "ProductID"}});
    return db;
}

}  // namespace oracle
