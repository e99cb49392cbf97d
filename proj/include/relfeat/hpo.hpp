#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace relfeat {

enum class DimensionKind : uint8_t { Real, Integer, LogReal };

struct SearchSpace {
    struct Dimension {
        std::string name;
        DimensionKind kind;
        double lower, upper;  // lower < upper; LogReal requires lower > 0
    };
    std::vector<Dimension> dimensions;

    void validate() const;
    // Externally visible config <-> unit-box coordinates used by the GP.
    std::vector<double> to_unit(const std::vector<double>& config) const;
    std::vector<double> from_unit(const std::vector<double>& unit) const;
};

// Matern 5/2 covariance with per-dimension length scales:
// sigma2 * (1 + sqrt(5) r + 5 r^2 / 3) * exp(-sqrt(5) r).
double matern52(const std::vector<double>& x1, const std::vector<double>& x2,
                double sigma2, const std::vector<double>& length_scales);

class GpSurrogate {
public:
    GpSurrogate(double sigma2, std::vector<double> length_scales,
                double noise = 1e-10);

    void add(const std::vector<double>& x, double y);
    size_t size() const { return ys_.size(); }

    void set_kernel(double sigma2, std::vector<double> length_scales, double noise);
    double sigma2() const { return sigma2_; }
    double prior_mean() const;

    // Standard GP conditionals with a constant prior mean (the observation
    // average); variance clamped at 0 against numerical noise.
    std::pair<double, double> posterior(const std::vector<double>& x) const;

    double log_marginal_likelihood() const;

private:
    void refactor() const;

    double sigma2_;
    std::vector<double> scales_;
    double noise_;
    std::vector<std::vector<double>> xs_;
    std::vector<double> ys_;
    mutable std::vector<double> chol_;   // lower-triangular factor, row-major
    mutable std::vector<double> alpha_;  // K^-1 (y - mean)
    mutable bool factored_ = false;
};

// EI = (best - mu) Phi(z) + sigma phi(z), z = (best - mu) / sigma;
// max(best - mu, 0) when the variance vanishes.
double expected_improvement(double mean, double variance, double best_loss);

struct TuneResult {
    std::vector<double> best_config;
    double best_loss;
    struct Step {
        int iteration;
        std::vector<double> config;
        double loss;
        double best_so_far;
    };
    std::vector<Step> history;
};

using Objective = std::function<double(const std::vector<double>&)>;

struct TuneOptions {
    int iterations = 50;  // total objective evaluations, warm-up included
    int warmup = 5;
    uint64_t seed = 42;
    int candidates = 1000;
};

// Sequential Bayesian optimization: seeded quasi-random warm-up, then
// EI-maximizing suggestions from a random multi-start plus local refinement
// around the incumbent candidate. Kernel hyperparameters are refit by a
// marginal-likelihood grid each iteration. Objective failures count as +inf
// and the loop continues.
TuneResult tune(const Objective& objective, const SearchSpace& space,
                const TuneOptions& options = {});

std::string tune_history_to_csv(const TuneResult& result, const SearchSpace& space);

}  // namespace relfeat
