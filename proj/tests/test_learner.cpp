#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "relfeat/learner.hpp"
#include "relfeat/stats.hpp"

using namespace relfeat;

namespace {

FeatureMatrix separable_matrix(size_t n, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.3);
    FeatureMatrix m;
    FeatureColumn signal;
    signal.name = "signal";
    FeatureColumn junk;
    junk.name = "junk";
    m.target.task = Task::Classification;
    for (size_t i = 0; i < n; ++i) {
        double y = i % 2 ? 1.0 : 0.0;
        signal.values.push_back((y > 0.5 ? 2.0 : -2.0) + noise(rng));
        junk.values.push_back(noise(rng));
        m.target.labels.push_back(y);
        m.example_ids.push_back(std::to_string(i));
    }
    m.columns = {signal, junk};
    return m;
}

}  // namespace

TEST_CASE("auc: perfect, inverted and tied score vectors") {
    CHECK(auc_score({0.1, 0.9, 0.2, 0.8}, {0, 1, 0, 1}) == doctest::Approx(1.0));
    CHECK(auc_score({0.9, 0.1, 0.8, 0.2}, {0, 1, 0, 1}) == doctest::Approx(0.0));
    CHECK(auc_score({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}) == doctest::Approx(0.5));
}

TEST_CASE("pearson basics") {
    CHECK(pearson({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0));
    CHECK(pearson({1, 2, 3}, {6, 4, 2}) == doctest::Approx(-1.0));
    CHECK(std::isnan(pearson({1, 1, 1}, {1, 2, 3})));
}

TEST_CASE("logistic learner separates a separable problem") {
    FeatureMatrix m = separable_matrix(200, 17);
    TrainSplit split = make_split(m.target, 0.25, 3);
    LearnerConfig cfg;
    cfg.task = Task::Classification;
    cfg.epochs = 300;
    LinearModel model = fit_linear(m, split.train_mask, cfg);
    double auc = evaluate_auc(model, m, split.train_mask, true);
    CHECK(auc >= 0.99);
    double loss = evaluate_loss(model, m, split.train_mask, true);
    CHECK(loss < 0.3);
}

TEST_CASE("ridge regression recovers a linear relation") {
    FeatureMatrix m;
    m.target.task = Task::Regression;
    FeatureColumn x;
    x.name = "x";
    for (int i = 0; i < 60; ++i) {
        double v = i / 10.0;
        x.values.push_back(v);
        m.target.labels.push_back(3.0 * v - 1.0);
        m.example_ids.push_back(std::to_string(i));
    }
    m.columns = {x};
    LearnerConfig cfg;
    cfg.task = Task::Regression;
    cfg.epochs = 800;
    cfg.learning_rate = 0.2;
    cfg.l2 = 1e-6;
    LinearModel model = fit_linear(m, {}, cfg);
    double loss = evaluate_loss(model, m, {}, false);
    CHECK(loss < 0.01);
}

TEST_CASE("null cells are mean-imputed with indicator columns") {
    FeatureMatrix m;
    m.target.task = Task::Classification;
    FeatureColumn f;
    f.name = "f";
    // null iff label is 1: the indicator carries all the signal
    for (int i = 0; i < 80; ++i) {
        double y = i % 2 ? 1.0 : 0.0;
        f.values.push_back(y > 0.5 ? feature_null() : 1.0);
        m.target.labels.push_back(y);
        m.example_ids.push_back(std::to_string(i));
    }
    m.columns = {f};
    LearnerConfig cfg;
    cfg.epochs = 300;
    LinearModel model = fit_linear(m, {}, cfg);
    CHECK(model.null_indicator_of[0] == 0);
    CHECK(evaluate_auc(model, m, {}, false) == doctest::Approx(1.0));
}

TEST_CASE("splits are deterministic, stratified and honor the ratio") {
    FeatureMatrix m = separable_matrix(100, 5);
    TrainSplit a = make_split(m.target, 0.2, 11);
    TrainSplit b = make_split(m.target, 0.2, 11);
    CHECK(a.train_mask == b.train_mask);
    size_t held = 0, held_pos = 0;
    for (size_t i = 0; i < a.train_mask.size(); ++i) {
        if (!a.train_mask[i]) {
            ++held;
            if (m.target.labels[i] > 0.5) ++held_pos;
        }
    }
    CHECK(held == 20);
    CHECK(held_pos == 10);  // stratified halves
}

TEST_CASE("zero learning rate leaves the model at its zero init") {
    FeatureMatrix m = separable_matrix(40, 9);
    LearnerConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.epochs = 50;
    LinearModel model = fit_linear(m, {}, cfg);
    for (double w : model.weights) CHECK(w == 0.0);
}
