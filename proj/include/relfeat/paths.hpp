#pragma once

#include <optional>
#include <string>
#include <vector>

#include "relfeat/database.hpp"

namespace relfeat {

// Undirected multigraph of tables; one edge per declared foreign key.
struct RelationalGraph {
    struct Edge {
        int table_a, table_b;   // table indices
        int col_a, col_b;       // join columns on each side
        std::string key_label;  // referencing column name, shown in paths
        int fk_index;
    };
    int node_count = 0;
    std::vector<Edge> edges;
    std::vector<int> depth;  // BFS depth from main; -1 when unreachable
    int main_node = 0;
};

RelationalGraph build_graph(const Database& db);

struct PathHop {
    int edge;      // index into graph.edges
    int to_table;  // table entered by this hop
    int from_col;  // join column in the table we leave
    int to_col;    // join column in to_table
};

struct JoiningPath {
    std::vector<PathHop> hops;
    int terminal_table = -1;
    int terminal_column = -1;
    ColumnKind terminal_kind = ColumnKind::Numeric;
    std::string canon;  // e.g. user>[UserID]order>[ProductID]product.Price
};

std::string canonical_path_string(const Database& db, const RelationalGraph& g,
                                  const std::vector<PathHop>& hops,
                                  int terminal_column);

// Enumerates admissible table sequences up to max_depth hops, one path per
// eligible terminal column, sorted by canonical string. `simple` forbids
// repeated tables, `forward_only` requires strictly increasing BFS depth,
// `all` permits revisits within the depth cap.
std::vector<JoiningPath> enumerate_paths(const Database& db,
                                         const RelationalGraph& graph,
                                         PathStrategy strategy, int max_depth);

// ---------------------------------------------------------------------------
// Hardness-reduction fixtures: a database instance whose joining structure
// encodes a Hamiltonian-cycle question about a source graph.

struct UndirectedGraph {
    int n = 0;
    std::vector<std::pair<int, int>> edges;  // 0-based, i < j

    bool has_edge(int a, int b) const;
};

struct ReductionInstance {
    Database database;
    UndirectedGraph source_graph;
    int label = 0;  // n, stored in T_1's target column
};

// n single-row tables T_1..T_n; column k_ij present in both T_i and T_j with
// equal values iff edge (v_i, v_j) exists, fresh distinct values otherwise.
ReductionInstance generate_reduction(const UndirectedGraph& g);

// Searches for a cyclic table sequence starting and ending at T_1 whose
// chained join is non-empty. Exists iff the source graph is Hamiltonian.
// Brute force over table permutations, guarded by max_nodes.
std::optional<std::vector<int>> hamiltonian_witness(const ReductionInstance& inst,
                                                    int max_nodes = 10);

}  // namespace relfeat
