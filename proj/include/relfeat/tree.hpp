#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "relfeat/paths.hpp"

namespace relfeat {

// One materialized joining-path result for a single training example.
// levels[j] holds the rows of the table entered by hop j+1; leaves are the
// terminal-column values of the deepest level's nodes.
struct TreeNode {
    int32_t row;     // row index in that level's table
    int32_t parent;  // index into previous level (or 0 for level 0)
    int64_t sort_ts; // nearest along-path timestamp, valid when has_ts
    bool has_ts;
};

struct RelationalTree {
    int example_row = -1;
    std::vector<std::vector<TreeNode>> levels;
};

struct Leaf {
    Cell value;
    int64_t ts;
    bool has_ts;
};

enum class CollectionVariant : uint8_t {
    NumberMultiset,
    Timeseries,
    ItemMultiset,
    SymbolSequence,
    TimestampSeries,
};

struct FlattenedCollection {
    CollectionVariant variant;
    std::vector<double> numbers;      // NumberMultiset / Timeseries values
    std::vector<int64_t> timestamps;  // Timeseries (parallel) / TimestampSeries
    std::vector<std::string> items;   // ItemMultiset / SymbolSequence
    size_t size() const;
};

// Time handling for one run: optional per-example cut-offs plus the
// collection-ordering column override.
struct TimePolicy {
    bool cutoff_active = false;
    std::vector<int64_t> cutoffs;      // per main row, valid when cutoff_active
    std::vector<bool> cutoff_present;  // null cut-off admits everything
    int override_table = -1;           // time_source config override
    int override_column = -1;
};

TimePolicy make_time_policy(const Database& db);

// The column ordering a path's collections, chosen as the first
// Timestamp-kind column encountered walking from the leaf table toward the
// main table (config override wins). depth is 1-based; 0 means none.
struct TimeSource {
    int depth = 0;
    int column = -1;
    bool exists() const { return depth > 0; }
};

TimeSource path_time_source(const Database& db, const JoiningPath& path,
                            const TimePolicy& policy);

// Builds trees level by level with hash joins on each hop's key columns.
// Intermediate levels are memoized per path prefix and shared across
// examples; the cache is populated once per prefix and then read-only.
class TreeBuilder {
public:
    TreeBuilder(const Database& db, const RelationalGraph& graph,
                TimePolicy policy, uint64_t seed,
                int64_t max_joined_size = 1000000000);

    RelationalTree build(size_t example_row, const JoiningPath& path);

    // All examples at once; index e holds the tree for main row e.
    const std::vector<RelationalTree>& build_all(const JoiningPath& path);

    std::vector<Leaf> leaves(const RelationalTree& tree, const JoiningPath& path) const;

    const Database& db() const { return db_; }

private:
    struct LevelSet;
    std::shared_ptr<const LevelSet> levels_for_prefix(const JoiningPath& path,
                                                      size_t hop_count);

    const Database& db_;
    const RelationalGraph& graph_;
    TimePolicy policy_;
    uint64_t seed_;
    int64_t max_joined_size_;
    std::map<std::string, std::shared_ptr<const LevelSet>> prefix_cache_;
    std::map<std::string, std::vector<RelationalTree>> tree_cache_;
    std::map<std::pair<int, int>, std::shared_ptr<const std::multimap<std::string, int32_t>>>
        column_index_cache_;
};

// Convenience wrapper matching the single-example contract. cutoff, when
// given, bounds every timestamped row in the tree.
RelationalTree build_tree(const Database& db, const RelationalGraph& graph,
                          size_t example_row, const JoiningPath& path,
                          std::optional<int64_t> cutoff,
                          uint64_t seed = 0,
                          int64_t max_joined_size = 1000000000);

FlattenedCollection flatten(const std::vector<Leaf>& leaves,
                            ColumnKind terminal_kind, bool time_ordered);

// Indented one-node-per-line dump for golden tests.
std::string dump_tree(const Database& db, const RelationalTree& tree,
                      const JoiningPath& path);

}  // namespace relfeat
