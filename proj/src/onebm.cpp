#include "relfeat/onebm.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <thread>

#include "relfeat/csv.hpp"
#include "relfeat/stats.hpp"

namespace relfeat {

double feature_null() { return std::numeric_limits<double>::quiet_NaN(); }
bool is_feature_null(double v) { return std::isnan(v); }

int FeatureMatrix::column_index(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
        if (columns[i].name == name) return static_cast<int>(i);
    return -1;
}

NumberStats transform_number_multiset(const std::vector<double>& values) {
    NumberStats s{feature_null(), feature_null(), feature_null(), feature_null(),
                  feature_null(), 0.0};
    if (values.empty()) return s;
    double sum = 0, mx = values[0], mn = values[0];
    for (double v : values) {
        sum += v;
        mx = std::max(mx, v);
        mn = std::min(mn, v);
    }
    double n = static_cast<double>(values.size());
    double avg = sum / n;
    double ss = 0;
    for (double v : values) ss += (v - avg) * (v - avg);
    s.avg = avg;
    s.variance = ss / n;
    s.max = mx;
    s.min = mn;
    s.sum = sum;
    s.count = n;
    return s;
}

TimeseriesStats transform_timeseries(const std::vector<double>& values,
                                     const std::vector<int64_t>& timestamps,
                                     std::optional<int64_t> cutoff, int k) {
    TimeseriesStats out;
    out.base = transform_number_multiset(values);
    out.recent.assign(static_cast<size_t>(k), feature_null());
    for (int i = 0; i < k && i < static_cast<int>(values.size()); ++i)
        out.recent[static_cast<size_t>(i)] = values[values.size() - 1 - static_cast<size_t>(i)];
    out.count_per_gap = feature_null();
    out.sum_per_gap = feature_null();
    if (cutoff && !values.empty()) {
        int64_t min_ts = *std::min_element(timestamps.begin(), timestamps.end());
        int64_t max_gap = *cutoff - min_ts;
        if (max_gap != 0) {
            out.count_per_gap = out.base.count / static_cast<double>(max_gap);
            out.sum_per_gap = out.base.sum / static_cast<double>(max_gap);
        }
    }
    return out;
}

TimestampParts transform_timestamp(int64_t value, std::optional<int64_t> cutoff) {
    CalendarParts p = calendar_parts(value);
    TimestampParts out;
    out.year = p.year;
    out.month = p.month;
    out.day = p.day;
    out.weekday = p.weekday;
    out.hour = p.hour;
    out.gap_to_cutoff =
        cutoff ? static_cast<double>(*cutoff - value) : feature_null();
    return out;
}

TimeseriesStats transform_timestamp_series(const std::vector<int64_t>& timestamps,
                                           int64_t cutoff, int k) {
    std::vector<double> gaps;
    gaps.reserve(timestamps.size());
    for (int64_t t : timestamps) gaps.push_back(static_cast<double>(cutoff - t));
    return transform_timeseries(gaps, timestamps, cutoff, k);
}

ItemsetFeatures transform_itemset(
    const std::vector<std::vector<std::string>>& per_example_items,
    const std::vector<double>& target, const std::vector<bool>& train_mask,
    int top_n, double min_corr) {
    const size_t m = per_example_items.size();
    ItemsetFeatures out;
    out.count.resize(m);
    out.distinct_count.resize(m);

    std::vector<std::map<std::string, double>> occurrence(m);
    for (size_t e = 0; e < m; ++e) {
        out.count[e] = static_cast<double>(per_example_items[e].size());
        for (const auto& item : per_example_items[e]) occurrence[e][item] += 1.0;
        out.distinct_count[e] = static_cast<double>(occurrence[e].size());
    }

    auto in_train = [&](size_t e) { return train_mask.empty() || train_mask[e]; };

    // Candidate items and their training-split correlation with the target.
    std::map<std::string, double> corr;
    {
        std::map<std::string, bool> seen;
        for (size_t e = 0; e < m; ++e)
            if (in_train(e))
                for (const auto& [item, _] : occurrence[e]) seen[item] = true;

        std::vector<double> y;
        for (size_t e = 0; e < m; ++e)
            if (in_train(e)) y.push_back(target[e]);

        for (const auto& [item, _] : seen) {
            std::vector<double> x;
            for (size_t e = 0; e < m; ++e) {
                if (!in_train(e)) continue;
                auto it = occurrence[e].find(item);
                x.push_back(it == occurrence[e].end() ? 0.0 : it->second);
            }
            double r = pearson(x, y);
            if (!std::isnan(r)) corr[item] = r;
        }
    }

    std::vector<std::pair<std::string, double>> ranked(corr.begin(), corr.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        double fa = std::fabs(a.second), fb = std::fabs(b.second);
        if (fa != fb) return fa > fb;
        return a.first < b.first;
    });
    for (const auto& [item, r] : ranked) {
        if (static_cast<int>(out.selected_items.size()) >= top_n) break;
        if (std::fabs(r) < min_corr) break;
        out.selected_items.push_back(item);
    }
    std::sort(out.selected_items.begin(), out.selected_items.end());

    for (const auto& item : out.selected_items) {
        std::vector<double> col(m, 0.0);
        for (size_t e = 0; e < m; ++e) {
            auto it = occurrence[e].find(item);
            if (it != occurrence[e].end()) col[e] = it->second;
        }
        out.item_counts.push_back(std::move(col));
    }
    return out;
}

std::vector<double> transform_categorical(const std::vector<Cell>& values,
                                          const std::vector<bool>& train_mask) {
    auto level_of = [](const Cell& c) -> std::string {
        if (c.type == ValueType::Number) {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.17g", c.num);
            return buf;
        }
        if (c.type == ValueType::Time) return format_timestamp(c.time);
        return c.text;
    };
    std::map<std::string, size_t> freq;
    for (size_t e = 0; e < values.size(); ++e) {
        if (!train_mask.empty() && !train_mask[e]) continue;
        if (values[e].is_null()) continue;
        freq[level_of(values[e])] += 1;
    }
    std::vector<std::pair<std::string, size_t>> ranked(freq.begin(), freq.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::map<std::string, double> rank;
    for (size_t i = 0; i < ranked.size(); ++i)
        rank[ranked[i].first] = static_cast<double>(i + 1);
    double unseen = static_cast<double>(ranked.size() + 1);

    std::vector<double> out(values.size(), feature_null());
    for (size_t e = 0; e < values.size(); ++e) {
        if (values[e].is_null()) continue;
        auto it = rank.find(level_of(values[e]));
        out[e] = it == rank.end() ? unseen : it->second;
    }
    return out;
}

const char* to_string(Aggregator a) {
    switch (a) {
    case Aggregator::Sum: return "SUM";
    case Aggregator::Mean: return "MEAN";
    case Aggregator::Max: return "MAX";
    case Aggregator::Min: return "MIN";
    case Aggregator::Count: return "COUNT";
    }
    return "?";
}

namespace {

std::optional<double> apply_aggregator(Aggregator a,
                                       const std::vector<double>& xs) {
    // An empty-children node yields null whatever the aggregator; the parent
    // skips it.
    if (xs.empty()) return std::nullopt;
    if (a == Aggregator::Count) return static_cast<double>(xs.size());
    switch (a) {
    case Aggregator::Sum: {
        double s = 0;
        for (double v : xs) s += v;
        return s;
    }
    case Aggregator::Mean: {
        double s = 0;
        for (double v : xs) s += v;
        return s / static_cast<double>(xs.size());
    }
    case Aggregator::Max: return *std::max_element(xs.begin(), xs.end());
    case Aggregator::Min: return *std::min_element(xs.begin(), xs.end());
    default: return std::nullopt;
    }
}

}  // namespace

std::optional<double> dfs_aggregate(const Database& db, const RelationalTree& tree,
                                    const JoiningPath& path,
                                    const std::vector<Aggregator>& per_depth) {
    const size_t depth = tree.levels.size();
    if (per_depth.size() != depth)
        throw std::invalid_argument("aggregator list length must equal tree depth");
    if (depth == 0) return std::nullopt;

    // Outputs of the deepest level are the leaf values themselves.
    const Table& terminal = db.tables[static_cast<size_t>(path.terminal_table)];
    std::vector<std::optional<double>> outputs;
    outputs.reserve(tree.levels.back().size());
    for (const TreeNode& n : tree.levels.back()) {
        const Cell& v = terminal.rows[static_cast<size_t>(n.row)]
                                     [static_cast<size_t>(path.terminal_column)];
        if (v.type == ValueType::Number) outputs.emplace_back(v.num);
        else if (v.type == ValueType::Time) outputs.emplace_back(static_cast<double>(v.time));
        else outputs.emplace_back(std::nullopt);
    }

    for (size_t lvl = depth; lvl-- > 0;) {
        size_t parent_count = lvl == 0 ? 1 : tree.levels[lvl - 1].size();
        std::vector<std::vector<double>> buckets(parent_count);
        for (size_t i = 0; i < tree.levels[lvl].size(); ++i) {
            size_t parent = lvl == 0
                                ? 0
                                : static_cast<size_t>(tree.levels[lvl][i].parent);
            if (outputs[i]) buckets[parent].push_back(*outputs[i]);
        }
        std::vector<std::optional<double>> next(parent_count);
        for (size_t p = 0; p < parent_count; ++p)
            next[p] = apply_aggregator(per_depth[lvl], buckets[p]);
        outputs = std::move(next);
        if (lvl == 0) return outputs[0];
    }
    return std::nullopt;
}

namespace {

struct ColumnBlock {
    std::string canon;
    std::vector<FeatureColumn> columns;
};

void emit(ColumnBlock& block, const std::string& transform,
          std::vector<double> values) {
    FeatureColumn col;
    col.path = block.canon;
    col.transform = transform;
    col.name = block.canon + ":" + transform;
    col.values = std::move(values);
    block.columns.push_back(std::move(col));
}

std::vector<double> column_of(std::vector<std::vector<double>>& rows, size_t idx) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (auto& r : rows) out.push_back(r[idx]);
    return out;
}

void run_parallel(int threads, size_t count,
                  const std::function<void(size_t)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    size_t workers = std::min<size_t>(static_cast<size_t>(threads), count);
    for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            while (true) {
                size_t i = next.fetch_add(1);
                if (i >= count) return;
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

// Rule-table features of one flattened path across all examples.
ColumnBlock path_block(const Database& db, TreeBuilder& builder,
                       const JoiningPath& path, const TimePolicy& policy,
                       const TargetEncoding& target,
                       const FeatureGenOptions& options) {
    const PipelineConfig& pipe = db.pipeline;
    const size_t m = db.example_count();
    ColumnBlock block;
    block.canon = path.canon;

    const std::vector<RelationalTree>& trees = builder.build_all(path);
    TimeSource src = path_time_source(db, path, policy);
    bool ordered = src.exists();
    bool has_cutoff = policy.cutoff_active;

    std::vector<FlattenedCollection> collections(m);
    for (size_t e = 0; e < m; ++e) {
        collections[e] = flatten(builder.leaves(trees[e], path),
                                 path.terminal_kind, ordered);
    }
    CollectionVariant variant = flatten({}, path.terminal_kind, ordered).variant;
    auto cutoff_of = [&](size_t e) -> std::optional<int64_t> {
        if (!has_cutoff || !policy.cutoff_present[e]) return std::nullopt;
        return policy.cutoffs[e];
    };

    bool want_rules = options.rules != "dfs";
    if (want_rules) {
        switch (variant) {
        case CollectionVariant::NumberMultiset: {
            std::vector<std::vector<double>> rows(m);
            for (size_t e = 0; e < m; ++e) {
                NumberStats s = transform_number_multiset(collections[e].numbers);
                rows[e] = {s.avg, s.variance, s.max, s.min, s.sum, s.count};
            }
            const char* names[] = {"avg", "variance", "max", "min", "sum", "count"};
            for (size_t i = 0; i < 6; ++i) emit(block, names[i], column_of(rows, i));
            break;
        }
        case CollectionVariant::Timeseries: {
            int k = pipe.recent_k;
            std::vector<TimeseriesStats> stats(m);
            for (size_t e = 0; e < m; ++e)
                stats[e] = transform_timeseries(collections[e].numbers,
                                                collections[e].timestamps,
                                                cutoff_of(e), k);
            auto base = [&](const char* name, auto getter) {
                std::vector<double> col(m);
                for (size_t e = 0; e < m; ++e) col[e] = getter(stats[e]);
                emit(block, name, std::move(col));
            };
            base("avg", [](const TimeseriesStats& s) { return s.base.avg; });
            base("max", [](const TimeseriesStats& s) { return s.base.max; });
            base("min", [](const TimeseriesStats& s) { return s.base.min; });
            base("sum", [](const TimeseriesStats& s) { return s.base.sum; });
            base("count", [](const TimeseriesStats& s) { return s.base.count; });
            base("variance", [](const TimeseriesStats& s) { return s.base.variance; });
            for (int i = 0; i < k; ++i) {
                std::vector<double> col(m);
                for (size_t e = 0; e < m; ++e)
                    col[e] = stats[e].recent[static_cast<size_t>(i)];
                emit(block, "recent_" + std::to_string(i + 1), std::move(col));
            }
            if (has_cutoff) {
                base("count_per_gap",
                     [](const TimeseriesStats& s) { return s.count_per_gap; });
                base("sum_per_gap",
                     [](const TimeseriesStats& s) { return s.sum_per_gap; });
            }
            break;
        }
        case CollectionVariant::TimestampSeries: {
            if (has_cutoff) {
                int k = pipe.recent_k;
                std::vector<TimeseriesStats> stats(m);
                bool any = false;
                for (size_t e = 0; e < m; ++e) {
                    auto c = cutoff_of(e);
                    if (c) {
                        stats[e] = transform_timestamp_series(
                            collections[e].timestamps, *c, k);
                        any = true;
                    } else {
                        stats[e] = transform_timeseries({}, {}, std::nullopt, k);
                    }
                }
                if (any) {
                    auto base = [&](const char* name, auto getter) {
                        std::vector<double> col(m);
                        for (size_t e = 0; e < m; ++e) col[e] = getter(stats[e]);
                        emit(block, name, std::move(col));
                    };
                    base("gap_avg", [](const TimeseriesStats& s) { return s.base.avg; });
                    base("gap_max", [](const TimeseriesStats& s) { return s.base.max; });
                    base("gap_min", [](const TimeseriesStats& s) { return s.base.min; });
                    base("gap_sum", [](const TimeseriesStats& s) { return s.base.sum; });
                    base("gap_count",
                         [](const TimeseriesStats& s) { return s.base.count; });
                    base("gap_variance",
                         [](const TimeseriesStats& s) { return s.base.variance; });
                    for (int i = 0; i < k; ++i) {
                        std::vector<double> col(m);
                        for (size_t e = 0; e < m; ++e)
                            col[e] = stats[e].recent[static_cast<size_t>(i)];
                        emit(block, "gap_recent_" + std::to_string(i + 1), std::move(col));
                    }
                    base("gap_count_per_gap",
                         [](const TimeseriesStats& s) { return s.count_per_gap; });
                    base("gap_sum_per_gap",
                         [](const TimeseriesStats& s) { return s.sum_per_gap; });
                }
            }
            break;
        }
        case CollectionVariant::ItemMultiset:
        case CollectionVariant::SymbolSequence: {
            bool sequence = variant == CollectionVariant::SymbolSequence;
            std::vector<std::vector<std::string>> items(m);
            for (size_t e = 0; e < m; ++e) items[e] = collections[e].items;
            ItemsetFeatures f =
                transform_itemset(items, target.labels, options.train_mask,
                                  pipe.top_items, pipe.min_correlation);
            emit(block, "count", std::move(f.count));
            emit(block, "distinct_count", std::move(f.distinct_count));
            const char* prefix = sequence ? "symbol=" : "item=";
            for (size_t i = 0; i < f.selected_items.size(); ++i)
                emit(block, prefix + f.selected_items[i], std::move(f.item_counts[i]));
            break;
        }
        }
    }

    // Depth-wise aggregation baseline, numeric terminals only.
    bool want_dfs = options.rules != "onebm" &&
                    path.terminal_kind == ColumnKind::Numeric &&
                    static_cast<int>(path.hops.size()) <= options.dfs_max_depth;
    if (want_dfs) {
        const Aggregator aggs[] = {Aggregator::Sum, Aggregator::Mean,
                                   Aggregator::Max, Aggregator::Min,
                                   Aggregator::Count};
        size_t depth = path.hops.size();
        std::vector<size_t> idx(depth, 0);
        while (true) {
            std::vector<Aggregator> tuple;
            std::string id = "dfs";
            for (size_t j = 0; j < depth; ++j) {
                tuple.push_back(aggs[idx[j]]);
                id += std::string("_") + to_string(aggs[idx[j]]);
            }
            std::vector<double> col(m);
            for (size_t e = 0; e < m; ++e) {
                auto v = dfs_aggregate(db, trees[e], path, tuple);
                col[e] = v ? *v : feature_null();
            }
            emit(block, id, std::move(col));
            size_t j = depth;
            while (j > 0) {
                if (++idx[j - 1] < 5) break;
                idx[j - 1] = 0;
                --j;
            }
            if (j == 0) break;
        }
    }
    return block;
}

// Direct features of main-table attribute columns.
std::vector<ColumnBlock> attribute_blocks(const Database& db,
                                          const TimePolicy& policy,
                                          const TargetEncoding& target,
                                          const FeatureGenOptions& options) {
    std::vector<ColumnBlock> blocks;
    const Table& main = db.main();
    const size_t m = main.rows.size();
    auto cutoff_of = [&](size_t e) -> std::optional<int64_t> {
        if (!policy.cutoff_active || !policy.cutoff_present[e]) return std::nullopt;
        return policy.cutoffs[e];
    };

    for (size_t c = 0; c < main.columns.size(); ++c) {
        const ColumnDef& def = main.columns[c];
        if (def.kind == ColumnKind::Key || def.kind == ColumnKind::Target ||
            def.kind == ColumnKind::Cutoff || def.kind == ColumnKind::Ignored)
            continue;
        ColumnBlock block;
        block.canon = main.name + "." + def.name;

        if (def.kind == ColumnKind::Numeric) {
            std::vector<double> col(m, feature_null());
            for (size_t e = 0; e < m; ++e)
                if (!main.rows[e][c].is_null()) col[e] = main.rows[e][c].num;
            emit(block, "value", std::move(col));
        } else if (def.kind == ColumnKind::Categorical) {
            std::vector<Cell> cells(m);
            for (size_t e = 0; e < m; ++e) cells[e] = main.rows[e][c];
            emit(block, "freq_rank", transform_categorical(cells, options.train_mask));
        } else if (def.kind == ColumnKind::Timestamp) {
            std::vector<TimestampParts> parts(m);
            std::vector<bool> present(m, false);
            for (size_t e = 0; e < m; ++e) {
                if (main.rows[e][c].type == ValueType::Time) {
                    parts[e] = transform_timestamp(main.rows[e][c].time, cutoff_of(e));
                    present[e] = true;
                }
            }
            auto calc = [&](const char* name, auto getter) {
                std::vector<double> col(m, feature_null());
                for (size_t e = 0; e < m; ++e)
                    if (present[e]) col[e] = getter(parts[e]);
                emit(block, name, std::move(col));
            };
            calc("year", [](const TimestampParts& p) { return p.year; });
            calc("month", [](const TimestampParts& p) { return p.month; });
            calc("day", [](const TimestampParts& p) { return p.day; });
            calc("weekday", [](const TimestampParts& p) { return p.weekday; });
            calc("hour", [](const TimestampParts& p) { return p.hour; });
            if (policy.cutoff_active)
                calc("gap_to_cutoff",
                     [](const TimestampParts& p) { return p.gap_to_cutoff; });
        } else if (def.kind == ColumnKind::Text) {
            std::vector<std::vector<std::string>> tokens(m);
            for (size_t e = 0; e < m; ++e)
                if (!main.rows[e][c].is_null())
                    tokens[e] = whitespace_tokens(main.rows[e][c].text);
            ItemsetFeatures f = transform_itemset(tokens, target.labels,
                                                  options.train_mask,
                                                  db.pipeline.top_items,
                                                  db.pipeline.min_correlation);
            emit(block, "count", std::move(f.count));
            emit(block, "distinct_count", std::move(f.distinct_count));
            for (size_t i = 0; i < f.selected_items.size(); ++i)
                emit(block, "symbol=" + f.selected_items[i],
                     std::move(f.item_counts[i]));
        }
        if (!block.columns.empty()) blocks.push_back(std::move(block));
    }
    return blocks;
}

}  // namespace

FeatureMatrix generate_features(const Database& db, const RelationalGraph& graph,
                                const std::vector<JoiningPath>& paths,
                                const FeatureGenOptions& options) {
    FeatureMatrix out;
    out.target = encode_target(db);
    const Table& main = db.main();
    const size_t m = main.rows.size();

    // Example ids: the main table's first key column when present, else the
    // 0-based row ordinal.
    int id_col = -1;
    for (size_t c = 0; c < main.columns.size(); ++c) {
        if (main.columns[c].kind == ColumnKind::Key) {
            id_col = static_cast<int>(c);
            break;
        }
    }
    for (size_t e = 0; e < m; ++e) {
        if (id_col >= 0 && !main.rows[e][static_cast<size_t>(id_col)].is_null())
            out.example_ids.push_back(main.rows[e][static_cast<size_t>(id_col)].text);
        else
            out.example_ids.push_back(std::to_string(e));
    }

    TimePolicy policy = make_time_policy(db);
    TreeBuilder builder(db, graph, policy, db.pipeline.seed,
                        db.pipeline.max_joined_size);

    std::vector<ColumnBlock> blocks = attribute_blocks(db, policy, out.target, options);

    // Trees are built through the shared prefix cache sequentially; the
    // per-path transform work then runs on the worker pool.
    for (const auto& p : paths) builder.build_all(p);
    std::vector<ColumnBlock> path_blocks(paths.size());
    run_parallel(options.threads, paths.size(), [&](size_t i) {
        path_blocks[i] = path_block(db, builder, paths[i], policy, out.target, options);
    });
    for (auto& b : path_blocks)
        if (!b.columns.empty()) blocks.push_back(std::move(b));

    std::sort(blocks.begin(), blocks.end(),
              [](const ColumnBlock& a, const ColumnBlock& b) { return a.canon < b.canon; });
    for (auto& b : blocks)
        for (auto& c : b.columns) out.columns.push_back(std::move(c));
    return out;
}

std::string feature_matrix_to_csv(const FeatureMatrix& m) {
    std::string out;
    std::vector<std::string> header{"__example_id", "__target"};
    for (const auto& c : m.columns) header.push_back(c.name);
    write_csv_row(out, header);

    char buf[48];
    const size_t n = m.example_ids.size();
    for (size_t e = 0; e < n; ++e) {
        std::vector<std::string> row;
        row.reserve(m.columns.size() + 2);
        row.push_back(m.example_ids[e]);
        std::snprintf(buf, sizeof(buf), "%.17g", m.target.labels[e]);
        row.emplace_back(buf);
        for (const auto& c : m.columns) {
            if (is_feature_null(c.values[e])) {
                row.emplace_back();
            } else {
                std::snprintf(buf, sizeof(buf), "%.17g", c.values[e]);
                row.emplace_back(buf);
            }
        }
        write_csv_row(out, row);
    }
    return out;
}

}  // namespace relfeat
