#include "relfeat/r2n/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

namespace relfeat::r2n {

namespace {

std::vector<std::vector<const InputTree*>> gather(
    const std::vector<std::vector<InputTree>>& trees,
    const std::vector<size_t>& examples) {
    std::vector<std::vector<const InputTree*>> out(trees.size());
    for (size_t p = 0; p < trees.size(); ++p) {
        out[p].reserve(examples.size());
        for (size_t e : examples) out[p].push_back(&trees[p][e]);
    }
    return out;
}

// Forward pass to the loss node over a set of examples.
Tape::Id forward_loss(Tape& tape, TapeBinding& binding, R2NModel& model,
                      const std::vector<std::vector<const InputTree*>>& batch,
                      const std::vector<double>& labels) {
    std::vector<Tape::Id> outs;
    for (size_t p = 0; p < model.inputs.size(); ++p)
        outs.push_back(eval_batch(tape, binding, model, p, batch[p]));
    Tape::Id head = fuse_paths(tape, binding, model, outs);
    tape.check_finite(head, "network output");
    if (model.config.task == Task::Classification) {
        std::vector<int> classes;
        classes.reserve(labels.size());
        for (double y : labels) classes.push_back(static_cast<int>(y));
        return tape.softmax_cross_entropy(head, std::move(classes));
    }
    return tape.mean_squared_error(head, labels);
}

}  // namespace

GradResult grad(R2NModel& model,
                const std::vector<std::vector<const InputTree*>>& batch,
                const std::vector<double>& labels) {
    Tape tape;
    TapeBinding binding;
    Tape::Id loss = forward_loss(tape, binding, model, batch, labels);
    tape.backward(loss);

    GradResult out;
    out.loss = tape.value(loss).at(0, 0);
    auto declared = model.params.tensors();
    out.grads.reserve(declared.size());
    for (auto& [name, tensor] : declared) {
        Mat g(tensor->rows, tensor->cols);
        for (const auto& [mat, id] : binding.params) {
            if (mat == tensor) {
                g = tape.grad(id);
                break;
            }
        }
        out.grads.push_back(std::move(g));
    }
    return out;
}

double accuracy(R2NModel& model,
                const std::vector<std::vector<const InputTree*>>& trees,
                const std::vector<double>& labels) {
    Mat probs = predict(model, trees);
    size_t hits = 0;
    for (int i = 0; i < probs.rows; ++i) {
        int arg = 0;
        for (int j = 1; j < probs.cols; ++j)
            if (probs.at(i, j) > probs.at(i, arg)) arg = j;
        if (arg == static_cast<int>(labels[static_cast<size_t>(i)])) ++hits;
    }
    return probs.rows ? static_cast<double>(hits) / probs.rows : 0.0;
}

R2NModel train(const R2NDataset& dataset, const R2NConfig& config,
               TrainReport* report) {
    const size_t n = dataset.example_count();
    if (n < 20) throw std::invalid_argument("training needs at least 20 examples");
    config.validate();

    R2NModel model = init_model(config, dataset.inputs);

    // Seeded validation split, stratified by class for classification.
    std::mt19937_64 split_rng(config.seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<bool> is_val(n, false);
    if (config.task == Task::Classification) {
        std::map<int, std::vector<size_t>> by_class;
        for (size_t i = 0; i < n; ++i)
            by_class[static_cast<int>(dataset.labels[i])].push_back(i);
        for (auto& [cls, idx] : by_class) {
            std::shuffle(idx.begin(), idx.end(), split_rng);
            size_t held = static_cast<size_t>(
                std::floor(config.validation_ratio * static_cast<double>(idx.size())));
            for (size_t k = 0; k < held; ++k) is_val[idx[k]] = true;
        }
    } else {
        std::vector<size_t> idx(n);
        std::iota(idx.begin(), idx.end(), size_t{0});
        std::shuffle(idx.begin(), idx.end(), split_rng);
        size_t held = static_cast<size_t>(
            std::floor(config.validation_ratio * static_cast<double>(n)));
        for (size_t k = 0; k < held; ++k) is_val[idx[k]] = true;
    }
    std::vector<size_t> train_idx, val_idx;
    for (size_t i = 0; i < n; ++i) (is_val[i] ? val_idx : train_idx).push_back(i);
    if (train_idx.empty() || val_idx.empty())
        throw std::invalid_argument("dataset too small for the validation split");

    auto labels_of = [&](const std::vector<size_t>& idx) {
        std::vector<double> out;
        out.reserve(idx.size());
        for (size_t e : idx) out.push_back(dataset.labels[e]);
        return out;
    };
    auto val_batch = gather(dataset.trees, val_idx);
    auto val_labels = labels_of(val_idx);

    // ADAM state, flattened per declared tensor.
    auto declared = model.params.tensors();
    std::vector<Mat> m1, m2;
    for (auto& [name, t] : declared) {
        m1.emplace_back(t->rows, t->cols);
        m2.emplace_back(t->rows, t->cols);
    }
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    const double lr = config.learning_rate;

    const int steps_per_epoch = static_cast<int>(
        (train_idx.size() + static_cast<size_t>(config.batch_size) - 1) /
        static_cast<size_t>(config.batch_size));
    const int check_every = std::max(
        1, static_cast<int>(std::ceil(config.patience_fraction * steps_per_epoch)));
    const int patience_steps = check_every;

    TrainReport scratch;
    TrainReport& rep = report ? *report : scratch;
    rep = TrainReport{};
    rep.best_val_loss = std::numeric_limits<double>::infinity();

    R2NModel best = model;
    std::mt19937_64 shuffle_rng(config.seed ^ 0xda942042e4dd58b5ull);
    int step = 0;
    bool stop = false;

    auto validate_now = [&]() {
        Tape tape;
        TapeBinding binding;
        Tape::Id loss = forward_loss(tape, binding, model, val_batch, val_labels);
        return tape.value(loss).at(0, 0);
    };

    for (int epoch = 0; epoch < config.max_epochs && !stop; ++epoch) {
        std::vector<size_t> order = train_idx;
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (size_t at = 0; at < order.size() && !stop;
             at += static_cast<size_t>(config.batch_size)) {
            std::vector<size_t> chunk(
                order.begin() + static_cast<long>(at),
                order.begin() + static_cast<long>(std::min(
                                    order.size(),
                                    at + static_cast<size_t>(config.batch_size))));
            auto batch = gather(dataset.trees, chunk);
            auto labels = labels_of(chunk);

            Tape tape;
            TapeBinding binding;
            Tape::Id loss = forward_loss(tape, binding, model, batch, labels);
            tape.backward(loss);
            ++step;

            double t = static_cast<double>(step);
            double corr1 = 1.0 - std::pow(beta1, t);
            double corr2 = 1.0 - std::pow(beta2, t);
            for (size_t k = 0; k < declared.size(); ++k) {
                Mat* tensor = declared[k].second;
                const Mat* g = nullptr;
                for (const auto& [mat, id] : binding.params) {
                    if (mat == tensor) {
                        g = &tape.grad(id);
                        break;
                    }
                }
                if (!g) continue;  // tensor unused by this batch's graph
                for (size_t i = 0; i < tensor->a.size(); ++i) {
                    double gi = g->a[i];
                    m1[k].a[i] = beta1 * m1[k].a[i] + (1.0 - beta1) * gi;
                    m2[k].a[i] = beta2 * m2[k].a[i] + (1.0 - beta2) * gi * gi;
                    double mh = m1[k].a[i] / corr1;
                    double vh = m2[k].a[i] / corr2;
                    tensor->a[i] -= lr * mh / (std::sqrt(vh) + eps);
                    if (!std::isfinite(tensor->a[i]))
                        throw std::runtime_error("non-finite parameter after update: " +
                                                 declared[k].first);
                }
            }

            TrainReport::Point point;
            point.step = step;
            point.train_loss = tape.value(loss).at(0, 0);
            point.val_loss = std::numeric_limits<double>::quiet_NaN();

            if (step % check_every == 0) {
                double vl = validate_now();
                point.val_loss = vl;
                if (vl < rep.best_val_loss - 1e-12) {
                    rep.best_val_loss = vl;
                    rep.best_step = step;
                    best = model;
                } else if (step - rep.best_step >= patience_steps) {
                    stop = true;
                    rep.early_stopped = true;
                }
            }
            rep.curve.push_back(point);
        }
        rep.epochs = epoch + 1;
    }
    rep.steps = step;
    if (!std::isfinite(rep.best_val_loss)) best = model;
    return best;
}

std::string train_report_to_csv(const TrainReport& report) {
    std::string out = "step,train_loss,val_loss\n";
    char buf[48];
    for (const auto& p : report.curve) {
        out += std::to_string(p.step);
        std::snprintf(buf, sizeof(buf), ",%.17g", p.train_loss);
        out += buf;
        if (std::isnan(p.val_loss)) {
            out += ",";
        } else {
            std::snprintf(buf, sizeof(buf), ",%.17g", p.val_loss);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

}  // namespace relfeat::r2n
