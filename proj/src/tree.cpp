#include "relfeat/tree.hpp"

#include <algorithm>
#include <functional>
#include <random>
#include <stdexcept>

namespace relfeat {

size_t FlattenedCollection::size() const {
    switch (variant) {
    case CollectionVariant::NumberMultiset:
    case CollectionVariant::Timeseries:
        return numbers.size();
    case CollectionVariant::TimestampSeries:
        return timestamps.size();
    case CollectionVariant::ItemMultiset:
    case CollectionVariant::SymbolSequence:
        return items.size();
    }
    return 0;
}

TimePolicy make_time_policy(const Database& db) {
    TimePolicy p;
    if (db.cutoff_column >= 0) {
        p.cutoff_active = true;
        const Table& m = db.main();
        p.cutoffs.resize(m.rows.size(), 0);
        p.cutoff_present.resize(m.rows.size(), false);
        for (size_t r = 0; r < m.rows.size(); ++r) {
            const Cell& c = m.rows[r][static_cast<size_t>(db.cutoff_column)];
            if (c.type == ValueType::Time) {
                p.cutoffs[r] = c.time;
                p.cutoff_present[r] = true;
            }
        }
    }
    if (!db.pipeline.time_source_table.empty()) {
        int ti = db.table_index(db.pipeline.time_source_table);
        if (ti >= 0) {
            int ci = db.tables[static_cast<size_t>(ti)].column_index(
                db.pipeline.time_source_column);
            if (ci >= 0) {
                p.override_table = ti;
                p.override_column = ci;
            }
        }
    }
    return p;
}

TimeSource path_time_source(const Database& db, const JoiningPath& path,
                            const TimePolicy& policy) {
    TimeSource ts;
    for (size_t j = path.hops.size(); j > 0; --j) {
        int table = path.hops[j - 1].to_table;
        if (policy.override_table >= 0) {
            if (table == policy.override_table) {
                ts.depth = static_cast<int>(j);
                ts.column = policy.override_column;
                return ts;
            }
            continue;
        }
        int c = db.tables[static_cast<size_t>(table)].designated_time_column();
        if (c >= 0) {
            ts.depth = static_cast<int>(j);
            ts.column = c;
            return ts;
        }
    }
    return ts;
}

struct TreeBuilder::LevelSet {
    // Nodes of every example, grouped level by level; example ids parallel
    // to the node vectors.
    std::vector<std::vector<TreeNode>> levels;
    std::vector<std::vector<int32_t>> example;  // per level, per node
};

TreeBuilder::TreeBuilder(const Database& db, const RelationalGraph& graph,
                         TimePolicy policy, uint64_t seed, int64_t max_joined_size)
    : db_(db), graph_(graph), policy_(std::move(policy)), seed_(seed),
      max_joined_size_(max_joined_size) {}

namespace {

std::string prefix_key(const Database& db, const RelationalGraph& g,
                       const JoiningPath& path, size_t hop_count) {
    std::vector<PathHop> hops(path.hops.begin(),
                              path.hops.begin() + static_cast<long>(hop_count));
    return canonical_path_string(db, g, hops, -1);
}

}  // namespace

std::shared_ptr<const TreeBuilder::LevelSet> TreeBuilder::levels_for_prefix(
    const JoiningPath& path, size_t hop_count) {
    std::string key = prefix_key(db_, graph_, path, hop_count);
    auto it = prefix_cache_.find(key);
    if (it != prefix_cache_.end()) return it->second;

    auto out = std::make_shared<LevelSet>();
    const Table& main = db_.main();

    std::shared_ptr<const LevelSet> prev;
    if (hop_count > 1) prev = levels_for_prefix(path, hop_count - 1);

    const PathHop& hop = path.hops[hop_count - 1];
    const Table& to = db_.tables[static_cast<size_t>(hop.to_table)];
    const int time_col = to.designated_time_column();

    // Token index over the target table's join column, cached per column.
    auto cache_key = std::make_pair(hop.to_table, hop.to_col);
    auto idx_it = column_index_cache_.find(cache_key);
    std::shared_ptr<const std::multimap<std::string, int32_t>> index;
    if (idx_it != column_index_cache_.end()) {
        index = idx_it->second;
    } else {
        auto built = std::make_shared<std::multimap<std::string, int32_t>>();
        for (size_t r = 0; r < to.rows.size(); ++r) {
            const Cell& cell = to.rows[r][static_cast<size_t>(hop.to_col)];
            if (cell.is_null()) continue;
            for (const auto& tok : key_tokens(cell.text))
                built->emplace(tok, static_cast<int32_t>(r));
        }
        index = built;
        column_index_cache_.emplace(cache_key, index);
    }

    if (prev) {
        out->levels = prev->levels;
        out->example = prev->example;
    }

    std::vector<TreeNode> level;
    std::vector<int32_t> level_example;
    auto expand = [&](const Cell& key_cell, int32_t parent_idx, int32_t example_row,
                      int64_t parent_ts, bool parent_has_ts) {
        if (key_cell.is_null()) return;
        for (const auto& tok : key_tokens(key_cell.text)) {
            auto [lo, hi] = index->equal_range(tok);
            for (auto match = lo; match != hi; ++match) {
                int32_t row = match->second;
                int64_t ts = parent_ts;
                bool has_ts = parent_has_ts;
                if (time_col >= 0) {
                    const Cell& tc = to.rows[static_cast<size_t>(row)][static_cast<size_t>(time_col)];
                    if (tc.type == ValueType::Time) {
                        if (policy_.cutoff_active &&
                            policy_.cutoff_present[static_cast<size_t>(example_row)] &&
                            tc.time > policy_.cutoffs[static_cast<size_t>(example_row)])
                            continue;  // future row: drop with its subtree
                        ts = tc.time;
                        has_ts = true;
                    }
                }
                level.push_back(TreeNode{row, parent_idx, ts, has_ts});
                level_example.push_back(example_row);
            }
        }
    };

    if (hop_count == 1) {
        for (size_t e = 0; e < main.rows.size(); ++e)
            expand(main.rows[e][static_cast<size_t>(hop.from_col)],
                   static_cast<int32_t>(e), static_cast<int32_t>(e), 0, false);
    } else {
        const auto& parents = out->levels.back();
        const auto& parent_examples = out->example.back();
        const Table& from =
            db_.tables[static_cast<size_t>(path.hops[hop_count - 2].to_table)];
        for (size_t p = 0; p < parents.size(); ++p) {
            const Cell& key_cell =
                from.rows[static_cast<size_t>(parents[p].row)][static_cast<size_t>(hop.from_col)];
            expand(key_cell, static_cast<int32_t>(p), parent_examples[p],
                   parents[p].sort_ts, parents[p].has_ts);
        }
    }

    // Joined-size cap: subsample the level uniformly, keeping order.
    int64_t cells = static_cast<int64_t>(level.size()) *
                    static_cast<int64_t>(to.columns.size());
    if (cells > max_joined_size_) {
        size_t keep = static_cast<size_t>(max_joined_size_ /
                                          static_cast<int64_t>(to.columns.size()));
        std::mt19937_64 rng(seed_ ^ fnv1a64(key));
        std::vector<size_t> picked(level.size());
        for (size_t i = 0; i < level.size(); ++i) picked[i] = i;
        std::shuffle(picked.begin(), picked.end(), rng);
        picked.resize(keep);
        std::sort(picked.begin(), picked.end());
        std::vector<TreeNode> kept;
        std::vector<int32_t> kept_example;
        kept.reserve(keep);
        for (size_t i : picked) {
            kept.push_back(level[i]);
            kept_example.push_back(level_example[i]);
        }
        level = std::move(kept);
        level_example = std::move(kept_example);
    }

    out->levels.push_back(std::move(level));
    out->example.push_back(std::move(level_example));
    prefix_cache_.emplace(std::move(key), out);
    return out;
}

const std::vector<RelationalTree>& TreeBuilder::build_all(const JoiningPath& path) {
    if (path.hops.empty())
        throw std::invalid_argument("a joining path needs at least one hop");
    std::string key = prefix_key(db_, graph_, path, path.hops.size());
    auto cached = tree_cache_.find(key);
    if (cached != tree_cache_.end()) return cached->second;

    auto set = levels_for_prefix(path, path.hops.size());
    const size_t m = db_.example_count();
    std::vector<RelationalTree> trees(m);
    for (size_t e = 0; e < m; ++e) {
        trees[e].example_row = static_cast<int>(e);
        trees[e].levels.resize(set->levels.size());
    }
    // Local index of each node within its example's tree, per level.
    std::vector<std::vector<int32_t>> local(set->levels.size());
    for (size_t lvl = 0; lvl < set->levels.size(); ++lvl) {
        const auto& nodes = set->levels[lvl];
        const auto& examples = set->example[lvl];
        local[lvl].resize(nodes.size());
        for (size_t i = 0; i < nodes.size(); ++i) {
            int32_t e = examples[i];
            TreeNode n = nodes[i];
            if (lvl > 0) n.parent = local[lvl - 1][static_cast<size_t>(n.parent)];
            else n.parent = 0;
            auto& dst = trees[static_cast<size_t>(e)].levels[lvl];
            local[lvl][i] = static_cast<int32_t>(dst.size());
            dst.push_back(n);
        }
    }
    auto [it, _] = tree_cache_.emplace(std::move(key), std::move(trees));
    return it->second;
}

RelationalTree TreeBuilder::build(size_t example_row, const JoiningPath& path) {
    return build_all(path)[example_row];
}

std::vector<Leaf> TreeBuilder::leaves(const RelationalTree& tree,
                                      const JoiningPath& path) const {
    std::vector<Leaf> out;
    if (tree.levels.empty() || tree.levels.back().empty()) return out;
    const Table& t = db_.tables[static_cast<size_t>(path.terminal_table)];
    TimeSource src = path_time_source(db_, path, policy_);

    // Resolve each deepest node's time-source ancestor when ordering comes
    // from a shallower level.
    const auto& last = tree.levels.back();
    for (size_t i = 0; i < last.size(); ++i) {
        const Cell& v =
            t.rows[static_cast<size_t>(last[i].row)][static_cast<size_t>(path.terminal_column)];
        if (v.is_null()) continue;
        Leaf leaf;
        leaf.value = v;
        leaf.has_ts = false;
        leaf.ts = 0;
        if (src.exists()) {
            // Walk up to the node at the time-source depth.
            size_t lvl = tree.levels.size();
            int32_t node = static_cast<int32_t>(i);
            while (static_cast<int>(lvl) > src.depth) {
                node = tree.levels[lvl - 1][static_cast<size_t>(node)].parent;
                --lvl;
            }
            const TreeNode& holder = tree.levels[lvl - 1][static_cast<size_t>(node)];
            const Table& ht = db_.tables[static_cast<size_t>(
                path.hops[lvl - 1].to_table)];
            const Cell& tc =
                ht.rows[static_cast<size_t>(holder.row)][static_cast<size_t>(src.column)];
            if (tc.type == ValueType::Time) {
                leaf.ts = tc.time;
                leaf.has_ts = true;
            }
        }
        out.push_back(std::move(leaf));
    }
    return out;
}

RelationalTree build_tree(const Database& db, const RelationalGraph& graph,
                          size_t example_row, const JoiningPath& path,
                          std::optional<int64_t> cutoff, uint64_t seed,
                          int64_t max_joined_size) {
    TimePolicy policy = make_time_policy(db);
    if (cutoff) {
        policy.cutoff_active = true;
        policy.cutoffs.assign(db.example_count(), *cutoff);
        policy.cutoff_present.assign(db.example_count(), true);
    }
    TreeBuilder builder(db, graph, policy, seed, max_joined_size);
    return builder.build(example_row, path);
}

FlattenedCollection flatten(const std::vector<Leaf>& leaves,
                            ColumnKind terminal_kind, bool time_ordered) {
    FlattenedCollection out;
    std::vector<const Leaf*> ordered;
    ordered.reserve(leaves.size());
    for (const auto& l : leaves) ordered.push_back(&l);
    if (time_ordered) {
        std::stable_sort(ordered.begin(), ordered.end(),
                         [](const Leaf* a, const Leaf* b) {
                             if (a->has_ts != b->has_ts) return !a->has_ts;
                             return a->has_ts && a->ts < b->ts;
                         });
    }

    switch (terminal_kind) {
    case ColumnKind::Numeric:
        out.variant = time_ordered ? CollectionVariant::Timeseries
                                   : CollectionVariant::NumberMultiset;
        for (const auto* l : ordered) {
            out.numbers.push_back(l->value.num);
            if (time_ordered) out.timestamps.push_back(l->has_ts ? l->ts : 0);
        }
        break;
    case ColumnKind::Timestamp:
        out.variant = CollectionVariant::TimestampSeries;
        for (const auto* l : ordered) out.timestamps.push_back(l->value.time);
        break;
    case ColumnKind::Categorical:
        out.variant = time_ordered ? CollectionVariant::SymbolSequence
                                   : CollectionVariant::ItemMultiset;
        for (const auto* l : ordered) out.items.push_back(l->value.text);
        break;
    case ColumnKind::Text:
        out.variant = time_ordered ? CollectionVariant::SymbolSequence
                                   : CollectionVariant::ItemMultiset;
        for (const auto* l : ordered)
            for (auto& tok : whitespace_tokens(l->value.text))
                out.items.push_back(std::move(tok));
        break;
    default:
        out.variant = CollectionVariant::NumberMultiset;
        break;
    }
    return out;
}

std::string dump_tree(const Database& db, const RelationalTree& tree,
                      const JoiningPath& path) {
    std::string out = "example " + std::to_string(tree.example_row) + "\n";
    // Children indices per level for depth-first walk.
    std::vector<std::vector<std::vector<int32_t>>> children(tree.levels.size());
    for (size_t lvl = 0; lvl + 1 < tree.levels.size(); ++lvl)
        children[lvl].resize(tree.levels[lvl].size());
    for (size_t lvl = 1; lvl < tree.levels.size(); ++lvl)
        for (size_t i = 0; i < tree.levels[lvl].size(); ++i)
            children[lvl - 1][static_cast<size_t>(tree.levels[lvl][i].parent)]
                .push_back(static_cast<int32_t>(i));

    auto render_cell = [](const Cell& c) -> std::string {
        switch (c.type) {
        case ValueType::Null: return "(null)";
        case ValueType::Number: {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.17g", c.num);
            return buf;
        }
        case ValueType::Time: return format_timestamp(c.time);
        case ValueType::Text: return c.text;
        }
        return "?";
    };

    std::function<void(size_t, int32_t)> walk = [&](size_t lvl, int32_t node) {
        const Table& t = db.tables[static_cast<size_t>(path.hops[lvl].to_table)];
        const TreeNode& n = tree.levels[lvl][static_cast<size_t>(node)];
        out.append((lvl + 1) * 2, ' ');
        out += t.name + " row " + std::to_string(n.row);
        if (lvl + 1 == tree.levels.size()) {
            const Cell& v =
                t.rows[static_cast<size_t>(n.row)][static_cast<size_t>(path.terminal_column)];
            out += " -> " + render_cell(v);
        }
        out += "\n";
        if (lvl + 1 < tree.levels.size())
            for (int32_t c : children[lvl][static_cast<size_t>(node)]) walk(lvl + 1, c);
    };
    if (!tree.levels.empty())
        for (size_t i = 0; i < tree.levels[0].size(); ++i)
            walk(0, static_cast<int32_t>(i));
    return out;
}

}  // namespace relfeat
