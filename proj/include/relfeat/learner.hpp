#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relfeat/onebm.hpp"

namespace relfeat {

// Regularized linear / logistic model over a feature matrix. Nulls are
// imputed with the training-column mean and flagged through a companion
// is-null indicator column; inputs are z-scored with training statistics.
struct LearnerConfig {
    Task task = Task::Classification;
    double l2 = 1e-3;
    double learning_rate = 0.1;
    int epochs = 200;
    uint64_t seed = 42;
};

struct LinearModel {
    LearnerConfig config;
    // Preprocessing, frozen from the training split.
    std::vector<double> impute_mean;
    std::vector<double> scale_mean;
    std::vector<double> scale_std;
    std::vector<int> null_indicator_of;  // feature -> indicator slot or -1
    size_t input_width = 0;
    std::vector<double> weights;  // input_width + 1 (bias last)

    // Classification: probability of class 1. Regression: prediction.
    double score_row(const std::vector<double>& features) const;
};

struct TrainSplit {
    std::vector<bool> train_mask;  // true = training example
};

// Deterministic seeded holdout split, stratified for classification.
TrainSplit make_split(const TargetEncoding& target, double holdout_ratio,
                      uint64_t seed);

LinearModel fit_linear(const FeatureMatrix& matrix, const std::vector<bool>& train_mask,
                       const LearnerConfig& config);

std::vector<double> predict(const LinearModel& model, const FeatureMatrix& matrix);

// Mean loss over the masked examples: log loss or mean squared error.
double evaluate_loss(const LinearModel& model, const FeatureMatrix& matrix,
                     const std::vector<bool>& mask, bool invert_mask);

double evaluate_auc(const LinearModel& model, const FeatureMatrix& matrix,
                    const std::vector<bool>& mask, bool invert_mask);

}  // namespace relfeat
