#include "relfeat/learner.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

#include "relfeat/stats.hpp"

namespace relfeat {

TrainSplit make_split(const TargetEncoding& target, double holdout_ratio,
                      uint64_t seed) {
    const size_t n = target.labels.size();
    TrainSplit split;
    split.train_mask.assign(n, true);
    if (holdout_ratio <= 0.0) return split;

    std::mt19937_64 rng(seed);
    if (target.task == Task::Classification) {
        // Stratified: hold out the tail of a shuffled order per class.
        std::map<double, std::vector<size_t>> by_class;
        for (size_t i = 0; i < n; ++i) by_class[target.labels[i]].push_back(i);
        for (auto& [label, idx] : by_class) {
            std::shuffle(idx.begin(), idx.end(), rng);
            size_t held = static_cast<size_t>(
                std::floor(holdout_ratio * static_cast<double>(idx.size())));
            for (size_t k = 0; k < held; ++k) split.train_mask[idx[k]] = false;
        }
    } else {
        std::vector<size_t> idx(n);
        std::iota(idx.begin(), idx.end(), size_t{0});
        std::shuffle(idx.begin(), idx.end(), rng);
        size_t held =
            static_cast<size_t>(std::floor(holdout_ratio * static_cast<double>(n)));
        for (size_t k = 0; k < held; ++k) split.train_mask[idx[k]] = false;
    }
    return split;
}

namespace {

// Dense design matrix after imputation, scaling and indicator expansion.
struct Design {
    size_t width = 0;
    std::vector<std::vector<double>> rows;
};

Design build_design(const LinearModel& model, const FeatureMatrix& matrix) {
    Design d;
    d.width = model.input_width;
    const size_t n = matrix.example_ids.size();
    d.rows.assign(n, std::vector<double>(d.width, 0.0));
    size_t base = matrix.columns.size();
    for (size_t j = 0; j < matrix.columns.size(); ++j) {
        const auto& col = matrix.columns[j].values;
        int ind = model.null_indicator_of[j];
        for (size_t i = 0; i < n; ++i) {
            double v = col[i];
            bool null = is_feature_null(v);
            if (null) v = model.impute_mean[j];
            double z = model.scale_std[j] > 0
                           ? (v - model.scale_mean[j]) / model.scale_std[j]
                           : 0.0;
            d.rows[i][j] = z;
            if (ind >= 0 && null) d.rows[i][static_cast<size_t>(base + ind)] = 1.0;
        }
    }
    return d;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

double LinearModel::score_row(const std::vector<double>& x) const {
    double z = weights[input_width];
    for (size_t j = 0; j < input_width; ++j) z += weights[j] * x[j];
    return config.task == Task::Classification ? sigmoid(z) : z;
}

LinearModel fit_linear(const FeatureMatrix& matrix,
                       const std::vector<bool>& train_mask,
                       const LearnerConfig& config) {
    LinearModel model;
    model.config = config;
    const size_t n = matrix.example_ids.size();
    const size_t p = matrix.columns.size();
    auto in_train = [&](size_t e) { return train_mask.empty() || train_mask[e]; };

    if (config.task == Task::Classification) {
        for (size_t e = 0; e < n; ++e)
            if (in_train(e) && matrix.target.labels[e] > 1.0)
                throw std::invalid_argument(
                    "built-in classifier supports binary targets only");
    }

    model.impute_mean.assign(p, 0.0);
    model.scale_mean.assign(p, 0.0);
    model.scale_std.assign(p, 0.0);
    model.null_indicator_of.assign(p, -1);
    int indicators = 0;
    for (size_t j = 0; j < p; ++j) {
        double sum = 0;
        size_t cnt = 0, total = 0;
        for (size_t e = 0; e < n; ++e) {
            if (!in_train(e)) continue;
            ++total;
            double v = matrix.columns[j].values[e];
            if (is_feature_null(v)) continue;
            sum += v;
            ++cnt;
        }
        model.impute_mean[j] = cnt ? sum / static_cast<double>(cnt) : 0.0;
        if (cnt < total) model.null_indicator_of[j] = indicators++;

        double m2 = 0;
        size_t train_n = 0;
        for (size_t e = 0; e < n; ++e) {
            if (!in_train(e)) continue;
            double v = matrix.columns[j].values[e];
            if (is_feature_null(v)) v = model.impute_mean[j];
            m2 += v;
            ++train_n;
        }
        double mean = train_n ? m2 / static_cast<double>(train_n) : 0.0;
        double var = 0;
        for (size_t e = 0; e < n; ++e) {
            if (!in_train(e)) continue;
            double v = matrix.columns[j].values[e];
            if (is_feature_null(v)) v = model.impute_mean[j];
            var += (v - mean) * (v - mean);
        }
        model.scale_mean[j] = mean;
        model.scale_std[j] =
            train_n ? std::sqrt(var / static_cast<double>(train_n)) : 0.0;
    }
    model.input_width = p + static_cast<size_t>(indicators);
    model.weights.assign(model.input_width + 1, 0.0);

    Design design = build_design(model, matrix);
    std::vector<size_t> train_rows;
    for (size_t e = 0; e < n; ++e)
        if (in_train(e)) train_rows.push_back(e);
    if (train_rows.empty()) return model;

    const double inv_n = 1.0 / static_cast<double>(train_rows.size());
    std::vector<double> grad(model.weights.size());
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (size_t e : train_rows) {
            const auto& x = design.rows[e];
            double z = model.weights[model.input_width];
            for (size_t j = 0; j < model.input_width; ++j)
                z += model.weights[j] * x[j];
            double err;
            if (config.task == Task::Classification) {
                err = sigmoid(z) - matrix.target.labels[e];
            } else {
                err = z - matrix.target.labels[e];
            }
            for (size_t j = 0; j < model.input_width; ++j) grad[j] += err * x[j];
            grad[model.input_width] += err;
        }
        for (size_t j = 0; j < model.input_width; ++j) {
            grad[j] = grad[j] * inv_n + config.l2 * model.weights[j];
            model.weights[j] -= config.learning_rate * grad[j];
        }
        model.weights[model.input_width] -=
            config.learning_rate * grad[model.input_width] * inv_n;
    }
    return model;
}

std::vector<double> predict(const LinearModel& model, const FeatureMatrix& matrix) {
    Design design = build_design(model, matrix);
    std::vector<double> out;
    out.reserve(design.rows.size());
    for (const auto& x : design.rows) out.push_back(model.score_row(x));
    return out;
}

double evaluate_loss(const LinearModel& model, const FeatureMatrix& matrix,
                     const std::vector<bool>& mask, bool invert_mask) {
    std::vector<double> scores = predict(model, matrix);
    double loss = 0;
    size_t count = 0;
    for (size_t e = 0; e < scores.size(); ++e) {
        bool use = mask.empty() || (mask[e] != invert_mask);
        if (!use) continue;
        double y = matrix.target.labels[e];
        if (model.config.task == Task::Classification) {
            double prob = std::clamp(scores[e], 1e-12, 1.0 - 1e-12);
            loss += -(y * std::log(prob) + (1.0 - y) * std::log(1.0 - prob));
        } else {
            loss += (scores[e] - y) * (scores[e] - y);
        }
        ++count;
    }
    return count ? loss / static_cast<double>(count) : 0.0;
}

double evaluate_auc(const LinearModel& model, const FeatureMatrix& matrix,
                    const std::vector<bool>& mask, bool invert_mask) {
    std::vector<double> scores = predict(model, matrix);
    std::vector<double> used_scores;
    std::vector<int> used_labels;
    for (size_t e = 0; e < scores.size(); ++e) {
        bool use = mask.empty() || (mask[e] != invert_mask);
        if (!use) continue;
        used_scores.push_back(scores[e]);
        used_labels.push_back(matrix.target.labels[e] > 0.5 ? 1 : 0);
    }
    return auc_score(used_scores, used_labels);
}

}  // namespace relfeat
