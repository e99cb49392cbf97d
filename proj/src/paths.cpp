#include "relfeat/paths.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <stdexcept>

namespace relfeat {

RelationalGraph build_graph(const Database& db) {
    RelationalGraph g;
    g.node_count = static_cast<int>(db.tables.size());
    g.main_node = db.main_table;
    for (size_t i = 0; i < db.foreign_keys.size(); ++i) {
        const ResolvedForeignKey& fk = db.foreign_keys[i];
        RelationalGraph::Edge e;
        e.table_a = fk.from_table;
        e.table_b = fk.to_table;
        e.col_a = fk.from_col;
        e.col_b = fk.to_col;
        e.key_label = fk.decl.from_col;
        e.fk_index = static_cast<int>(i);
        g.edges.push_back(e);
    }
    g.depth.assign(static_cast<size_t>(g.node_count), -1);
    std::deque<int> queue;
    g.depth[static_cast<size_t>(g.main_node)] = 0;
    queue.push_back(g.main_node);
    while (!queue.empty()) {
        int u = queue.front();
        queue.pop_front();
        for (const auto& e : g.edges) {
            int v = -1;
            if (e.table_a == u) v = e.table_b;
            else if (e.table_b == u) v = e.table_a;
            else continue;
            if (g.depth[static_cast<size_t>(v)] < 0) {
                g.depth[static_cast<size_t>(v)] = g.depth[static_cast<size_t>(u)] + 1;
                queue.push_back(v);
            }
        }
    }
    return g;
}

std::string canonical_path_string(const Database& db, const RelationalGraph& g,
                                  const std::vector<PathHop>& hops,
                                  int terminal_column) {
    std::string s = db.main().name;
    for (const auto& h : hops) {
        s += ">[" + g.edges[static_cast<size_t>(h.edge)].key_label + "]";
        s += db.tables[static_cast<size_t>(h.to_table)].name;
    }
    if (terminal_column >= 0) {
        const Table& t =
            db.tables[static_cast<size_t>(hops.empty() ? db.main_table
                                                       : hops.back().to_table)];
        s += "." + t.columns[static_cast<size_t>(terminal_column)].name;
    }
    return s;
}

namespace {

bool terminal_eligible(ColumnKind k) {
    return k == ColumnKind::Numeric || k == ColumnKind::Categorical ||
           k == ColumnKind::Timestamp || k == ColumnKind::Text;
}

void extend(const Database& db, const RelationalGraph& g, PathStrategy strategy,
            int max_depth, std::vector<PathHop>& hops, std::vector<int>& visited,
            std::vector<JoiningPath>& out) {
    int current = hops.empty() ? db.main_table : hops.back().to_table;

    if (!hops.empty()) {
        const Table& t = db.tables[static_cast<size_t>(current)];
        for (size_t c = 0; c < t.columns.size(); ++c) {
            if (!terminal_eligible(t.columns[c].kind)) continue;
            JoiningPath p;
            p.hops = hops;
            p.terminal_table = current;
            p.terminal_column = static_cast<int>(c);
            p.terminal_kind = t.columns[c].kind;
            p.canon = canonical_path_string(db, g, hops, p.terminal_column);
            out.push_back(std::move(p));
        }
    }
    if (static_cast<int>(hops.size()) >= max_depth) return;

    for (size_t ei = 0; ei < g.edges.size(); ++ei) {
        const auto& e = g.edges[ei];
        int next = -1, from_col = -1, to_col = -1;
        if (e.table_a == current) {
            next = e.table_b;
            from_col = e.col_a;
            to_col = e.col_b;
        } else if (e.table_b == current) {
            next = e.table_a;
            from_col = e.col_b;
            to_col = e.col_a;
        } else {
            continue;
        }
        if (g.depth[static_cast<size_t>(next)] < 0) continue;  // unreachable table
        if (strategy == PathStrategy::Simple &&
            std::find(visited.begin(), visited.end(), next) != visited.end())
            continue;
        if (strategy == PathStrategy::ForwardOnly &&
            g.depth[static_cast<size_t>(next)] <= g.depth[static_cast<size_t>(current)])
            continue;
        hops.push_back(PathHop{static_cast<int>(ei), next, from_col, to_col});
        visited.push_back(next);
        extend(db, g, strategy, max_depth, hops, visited, out);
        visited.pop_back();
        hops.pop_back();
    }
}

}  // namespace

std::vector<JoiningPath> enumerate_paths(const Database& db,
                                         const RelationalGraph& graph,
                                         PathStrategy strategy, int max_depth) {
    if (max_depth < 1) throw std::invalid_argument("max_depth must be >= 1");
    std::vector<JoiningPath> out;
    std::vector<PathHop> hops;
    std::vector<int> visited{db.main_table};
    extend(db, graph, strategy, max_depth, hops, visited, out);
    std::sort(out.begin(), out.end(),
              [](const JoiningPath& a, const JoiningPath& b) { return a.canon < b.canon; });
    return out;
}

bool UndirectedGraph::has_edge(int a, int b) const {
    if (a > b) std::swap(a, b);
    for (const auto& [i, j] : edges)
        if (i == a && j == b) return true;
    return false;
}

ReductionInstance generate_reduction(const UndirectedGraph& g) {
    if (g.n < 3) throw std::invalid_argument("reduction needs at least 3 nodes");
    ReductionInstance inst;
    inst.source_graph = g;
    inst.label = g.n;

    Database& db = inst.database;
    db.pipeline = PipelineConfig{};
    int fresh = 0;
    // Shared key value per matched pair; two fresh values per unmatched pair.
    std::vector<std::vector<std::string>> key_value(
        static_cast<size_t>(g.n), std::vector<std::string>(static_cast<size_t>(g.n)));
    for (int i = 0; i < g.n; ++i) {
        for (int j = i + 1; j < g.n; ++j) {
            if (g.has_edge(i, j)) {
                std::string v = "m" + std::to_string(fresh++);
                key_value[static_cast<size_t>(i)][static_cast<size_t>(j)] = v;
                key_value[static_cast<size_t>(j)][static_cast<size_t>(i)] = v;
            } else {
                key_value[static_cast<size_t>(i)][static_cast<size_t>(j)] =
                    "u" + std::to_string(fresh++);
                key_value[static_cast<size_t>(j)][static_cast<size_t>(i)] =
                    "u" + std::to_string(fresh++);
            }
        }
    }

    for (int i = 0; i < g.n; ++i) {
        Table t;
        t.name = "T" + std::to_string(i + 1);
        t.is_main = (i == 0);
        std::vector<Cell> row;
        for (int j = 0; j < g.n; ++j) {
            if (j == i) continue;
            int a = std::min(i, j) + 1, b = std::max(i, j) + 1;
            ColumnDef def;
            def.name = "k" + std::to_string(a) + "_" + std::to_string(b);
            def.kind = ColumnKind::Key;
            t.columns.push_back(def);
            row.push_back(Cell::str(key_value[static_cast<size_t>(i)][static_cast<size_t>(j)]));
        }
        if (i == 0) {
            ColumnDef label;
            label.name = "label";
            label.kind = ColumnKind::Target;
            t.columns.push_back(label);
            row.push_back(Cell::number(static_cast<double>(g.n)));
        }
        t.rows.push_back(std::move(row));
        db.tables.push_back(std::move(t));
    }
    db.main_table = 0;
    db.target_column = db.main().column_index("label");

    for (int i = 0; i < g.n; ++i) {
        for (int j = i + 1; j < g.n; ++j) {
            ResolvedForeignKey fk;
            fk.from_table = i;
            fk.to_table = j;
            std::string col = "k" + std::to_string(i + 1) + "_" + std::to_string(j + 1);
            fk.from_col = db.tables[static_cast<size_t>(i)].column_index(col);
            fk.to_col = db.tables[static_cast<size_t>(j)].column_index(col);
            fk.decl = ForeignKey{db.tables[static_cast<size_t>(i)].name, col,
                                 db.tables[static_cast<size_t>(j)].name, col};
            db.foreign_keys.push_back(fk);
        }
    }
    return inst;
}

namespace {

// Single-row tables: the chained join along a table sequence is non-empty
// iff every consecutive pair shares its pair-key value.
bool chain_joins(const Database& db, const std::vector<int>& order) {
    for (size_t s = 0; s + 1 < order.size(); ++s) {
        int a = order[s], b = order[s + 1];
        int lo = std::min(a, b), hi = std::max(a, b);
        std::string col = "k" + std::to_string(lo + 1) + "_" + std::to_string(hi + 1);
        const Table& ta = db.tables[static_cast<size_t>(a)];
        const Table& tb = db.tables[static_cast<size_t>(b)];
        int ca = ta.column_index(col);
        int cb = tb.column_index(col);
        const Cell& va = ta.rows[0][static_cast<size_t>(ca)];
        const Cell& vb = tb.rows[0][static_cast<size_t>(cb)];
        if (!(va == vb)) return false;
    }
    return true;
}

}  // namespace

std::optional<std::vector<int>> hamiltonian_witness(const ReductionInstance& inst,
                                                    int max_nodes) {
    int n = inst.source_graph.n;
    if (n > max_nodes)
        throw std::invalid_argument("instance exceeds brute-force guard of " +
                                    std::to_string(max_nodes) + " nodes");
    std::vector<int> perm;
    for (int i = 1; i < n; ++i) perm.push_back(i);
    do {
        std::vector<int> order;
        order.push_back(0);
        order.insert(order.end(), perm.begin(), perm.end());
        order.push_back(0);
        if (chain_joins(inst.database, order)) return order;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::nullopt;
}

}  // namespace relfeat
