#pragma once

#include "relfeat/r2n/model.hpp"

namespace relfeat::r2n {

struct R2NDataset {
    std::vector<PathInputSpec> inputs;
    // trees[path][example]
    std::vector<std::vector<InputTree>> trees;
    std::vector<double> labels;  // class index or regression target
    size_t example_count() const { return labels.empty() ? 0 : labels.size(); }
};

struct TrainReport {
    struct Point {
        int step;
        double train_loss;
        double val_loss;  // NaN between validation checks
    };
    std::vector<Point> curve;
    double best_val_loss = 0.0;
    int best_step = 0;
    int steps = 0;
    int epochs = 0;
    bool early_stopped = false;
};

// ADAM over the full network with a seeded stratified validation split.
// Validation loss is checked every ceil(patience_fraction * steps_per_epoch)
// steps; training stops once a full patience window passes without
// improvement. Returns the parameters of the best validation checkpoint.
R2NModel train(const R2NDataset& dataset, const R2NConfig& config,
               TrainReport* report = nullptr);

std::string train_report_to_csv(const TrainReport& report);

// Gradients of the mean batch loss for every parameter tensor, in
// declaration order. Exposed for the finite-difference contract.
struct GradResult {
    double loss;
    std::vector<Mat> grads;  // parallel to params.tensors()
};

GradResult grad(R2NModel& model, const std::vector<std::vector<const InputTree*>>& batch,
                const std::vector<double>& labels);

double accuracy(R2NModel& model,
                const std::vector<std::vector<const InputTree*>>& trees,
                const std::vector<double>& labels);

}  // namespace relfeat::r2n
