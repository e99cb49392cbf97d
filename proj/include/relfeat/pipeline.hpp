#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "relfeat/featselect.hpp"
#include "relfeat/hpo.hpp"
#include "relfeat/learner.hpp"
#include "relfeat/onebm.hpp"
#include "relfeat/r2n/train.hpp"

namespace relfeat {

extern const char* kToolVersion;

struct RunManifest {
    uint64_t config_hash = 0;
    uint64_t seed = 0;
    std::string tool_version;
    size_t path_count = 0;
    size_t features_before = 0;
    size_t features_after = 0;
    std::vector<std::pair<std::string, double>> stage_ms;
    std::vector<std::string> outputs;

    std::string to_text() const;
};

struct RunOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<uint64_t> seed;       // overrides the config seed
    std::optional<PathStrategy> strategy;
    std::optional<int> max_depth;
    int threads = 1;
    bool desk_scale = false;
    int tune_iterations = 50;
    std::ostream* log = nullptr;  // progress lines, stderr in the CLI
};

// Derived per-stage seed: the stage name folded into the global seed.
uint64_t stage_seed(uint64_t global_seed, const std::string& stage);

// ingest -> graph -> paths -> features -> selection; writes features.csv,
// selection_report.txt and manifest.txt under out_dir.
struct FeaturesResult {
    FeatureMatrix matrix;       // post-selection
    SelectionReport report;
    std::vector<JoiningPath> paths;
    RunManifest manifest;
};
FeaturesResult run_features(const RunOptions& options);

// Features plus the built-in learner; reports holdout metrics.
struct TrainOnebmResult {
    FeaturesResult features;
    LinearModel model;
    double holdout_loss = 0.0;
    double holdout_auc = 0.0;  // classification only, NaN otherwise
};
TrainOnebmResult run_train_onebm(const RunOptions& options, bool tune_learner);

struct TrainR2nResult {
    r2n::TrainReport report;
    std::string checkpoint_path;
};
TrainR2nResult run_train_r2n(const RunOptions& options);

// Builds the r2n dataset for a database: one input per joining path plus an
// attribute block when the main table carries usable attribute columns.
r2n::R2NDataset build_r2n_dataset(const Database& db, const RelationalGraph& graph,
                                  const std::vector<JoiningPath>& paths,
                                  size_t max_paths = 16);

// Theorem checks plus the reduction property suite; each row is a named
// pass/fail.
struct TheoryReport {
    struct Row {
        std::string name;
        bool pass;
        std::string detail;
    };
    std::vector<Row> rows;
    bool all_pass() const;
};
TheoryReport run_verify_theory(uint64_t seed, int graph_samples = 200,
                               int invariance_trials = 10000,
                               int closed_form_sets = 1000);

// Direct permutation search on the source graph, used as the graph-side
// route against the join-side witness.
bool graph_is_hamiltonian(const UndirectedGraph& g);

}  // namespace relfeat
