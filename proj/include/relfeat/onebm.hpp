#pragma once

#include <optional>
#include <string>
#include <vector>

#include "relfeat/tree.hpp"

namespace relfeat {

// Nulls travel as quiet NaN inside feature columns.
double feature_null();
bool is_feature_null(double v);

struct FeatureColumn {
    std::string name;       // "<canonical path>:<transform>"
    std::string path;       // provenance: canonical path string
    std::string transform;  // provenance: transform id
    std::vector<double> values;  // one per training example, NaN = null
};

struct FeatureMatrix {
    std::vector<FeatureColumn> columns;
    std::vector<std::string> example_ids;
    TargetEncoding target;

    int column_index(const std::string& name) const;
};

// ---------------------------------------------------------------------------
// Rule-table transforms over flattened collections.

struct NumberStats {
    double avg, variance, max, min, sum;
    double count;  // non-null cardinality, 0 for the empty collection
};

// Population variance; empty collection yields nulls with count 0.
NumberStats transform_number_multiset(const std::vector<double>& values);

struct TimeseriesStats {
    NumberStats base;
    std::vector<double> recent;   // recent[i] = (i+1)-th most recent, NaN-padded
    double count_per_gap;         // count / max gap to cut-off
    double sum_per_gap;
};

// `values`/`timestamps` parallel and sorted ascending by time. Normalized
// features require a cut-off and a nonzero gap; they are null otherwise.
TimeseriesStats transform_timeseries(const std::vector<double>& values,
                                     const std::vector<int64_t>& timestamps,
                                     std::optional<int64_t> cutoff, int k);

struct TimestampParts {
    double year, month, day, weekday, hour;
    double gap_to_cutoff;  // null unless a cut-off exists
};

TimestampParts transform_timestamp(int64_t value, std::optional<int64_t> cutoff);

// Series of gaps to cut-off, then the timeseries rules on the gap series.
TimeseriesStats transform_timestamp_series(const std::vector<int64_t>& timestamps,
                                           int64_t cutoff, int k);

// Correlation-gated item columns. Occurrence counts per example feed a
// Pearson test against the target over the training mask; the top_n items
// by |correlation| >= min_corr survive, ties broken by item string.
struct ItemsetFeatures {
    std::vector<double> count;           // per example
    std::vector<double> distinct_count;  // per example
    std::vector<std::string> selected_items;
    std::vector<std::vector<double>> item_counts;  // per selected item
};

ItemsetFeatures transform_itemset(
    const std::vector<std::vector<std::string>>& per_example_items,
    const std::vector<double>& target, const std::vector<bool>& train_mask,
    int top_n, double min_corr);

// Frequency-rank encoding for a categorical column: most frequent level is
// rank 1, ties lexicographic, unseen levels rank max+1, null stays null.
std::vector<double> transform_categorical(const std::vector<Cell>& values,
                                          const std::vector<bool>& train_mask);

// ---------------------------------------------------------------------------
// Depth-wise aggregation baseline.

enum class Aggregator : uint8_t { Sum, Mean, Max, Min, Count };
const char* to_string(Aggregator a);

// Bottom-up composition: each node applies its depth's aggregator to its
// children's outputs, leaves pass values through, empty nodes yield null and
// are skipped by the parent. Null result when nothing aggregates.
std::optional<double> dfs_aggregate(const Database& db, const RelationalTree& tree,
                                    const JoiningPath& path,
                                    const std::vector<Aggregator>& per_depth);

// ---------------------------------------------------------------------------

struct FeatureGenOptions {
    std::string rules = "onebm";   // onebm | dfs | both
    std::vector<bool> train_mask;  // empty = every example is training
    int threads = 1;
    int dfs_max_depth = 3;
};

FeatureMatrix generate_features(const Database& db, const RelationalGraph& graph,
                                const std::vector<JoiningPath>& paths,
                                const FeatureGenOptions& options = {});

std::string feature_matrix_to_csv(const FeatureMatrix& m);

}  // namespace relfeat
