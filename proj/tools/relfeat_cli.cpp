#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "relfeat/pipeline.hpp"

namespace {

struct CommonFlags {
    std::string config;
    std::string out_dir = ".";
    std::optional<uint64_t> seed;
    std::optional<std::string> strategy;
    std::optional<int> max_depth;
    int threads = 1;
    bool desk_scale = false;
};

void attach_common(CLI::App* cmd, CommonFlags& flags, bool needs_config) {
    auto* cfg = cmd->add_option("--config", flags.config, "schema config file");
    if (needs_config) cfg->required();
    cmd->add_option("--out-dir", flags.out_dir, "artifact output directory");
    cmd->add_option("--seed", flags.seed, "override the config seed");
    cmd->add_option("--threads", flags.threads, "worker cap for parallel stages")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--strategy", flags.strategy,
                    "path strategy: simple | forward_only | all");
    cmd->add_option("--max-depth", flags.max_depth, "joining path depth cap")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--desk-scale", flags.desk_scale,
                  "shrink r2n network sizes to workstation scale");
}

relfeat::RunOptions to_options(const CommonFlags& flags) {
    relfeat::RunOptions o;
    o.config_path = flags.config;
    o.out_dir = flags.out_dir;
    o.seed = flags.seed;
    o.threads = flags.threads;
    o.desk_scale = flags.desk_scale;
    if (flags.strategy) {
        auto s = relfeat::strategy_from_string(*flags.strategy);
        if (!s) throw CLI::ValidationError("--strategy", "unknown strategy");
        o.strategy = *s;
    }
    o.max_depth = flags.max_depth;
    o.log = &std::cerr;
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"relational feature engineering pipeline"};
    app.require_subcommand(1);

    CommonFlags features_flags, onebm_flags, r2n_flags, tune_flags;
    int tune_iterations = 50;
    uint64_t theory_seed = 42;

    CLI::App* features = app.add_subcommand(
        "features", "emit the feature matrix and selection report");
    attach_common(features, features_flags, true);

    CLI::App* train_onebm = app.add_subcommand(
        "train-onebm", "features plus the built-in linear learner");
    attach_common(train_onebm, onebm_flags, true);

    CLI::App* tune_cmd = app.add_subcommand(
        "tune", "train-onebm with Bayesian-optimized learner hyperparameters");
    attach_common(tune_cmd, tune_flags, true);
    tune_cmd->add_option("--iterations", tune_iterations,
                         "objective evaluations, warm-up included");

    CLI::App* train_r2n = app.add_subcommand(
        "train-r2n", "train the relational recurrent network and checkpoint it");
    attach_common(train_r2n, r2n_flags, true);

    CLI::App* verify = app.add_subcommand(
        "verify-theory", "run the expressiveness and reduction property suites");
    verify->add_option("--seed", theory_seed, "sample seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (features->parsed()) {
            relfeat::run_features(to_options(features_flags));
        } else if (train_onebm->parsed()) {
            relfeat::run_train_onebm(to_options(onebm_flags), false);
        } else if (tune_cmd->parsed()) {
            relfeat::RunOptions o = to_options(tune_flags);
            o.tune_iterations = tune_iterations;
            relfeat::run_train_onebm(o, true);
        } else if (train_r2n->parsed()) {
            relfeat::run_train_r2n(to_options(r2n_flags));
        } else if (verify->parsed()) {
            relfeat::TheoryReport report = relfeat::run_verify_theory(theory_seed);
            for (const auto& row : report.rows) {
                std::printf("%-52s %s%s%s\n", row.name.c_str(),
                            row.pass ? "PASS" : "FAIL",
                            row.detail.empty() ? "" : "  ", row.detail.c_str());
            }
            return report.all_pass() ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
