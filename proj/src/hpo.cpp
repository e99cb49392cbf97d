#include "relfeat/hpo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <stdexcept>

#include "relfeat/stats.hpp"

namespace relfeat {

void SearchSpace::validate() const {
    if (dimensions.empty()) throw std::invalid_argument("empty search space");
    for (const auto& d : dimensions) {
        if (!(d.lower < d.upper))
            throw std::invalid_argument("dimension '" + d.name + "': lower must be < upper");
        if (d.kind == DimensionKind::LogReal && !(d.lower > 0))
            throw std::invalid_argument("dimension '" + d.name +
                                        "': log_real requires lower > 0");
    }
}

std::vector<double> SearchSpace::to_unit(const std::vector<double>& config) const {
    std::vector<double> u(dimensions.size());
    for (size_t i = 0; i < dimensions.size(); ++i) {
        const auto& d = dimensions[i];
        if (d.kind == DimensionKind::LogReal) {
            u[i] = (std::log(config[i]) - std::log(d.lower)) /
                   (std::log(d.upper) - std::log(d.lower));
        } else {
            u[i] = (config[i] - d.lower) / (d.upper - d.lower);
        }
    }
    return u;
}

std::vector<double> SearchSpace::from_unit(const std::vector<double>& unit) const {
    std::vector<double> c(dimensions.size());
    for (size_t i = 0; i < dimensions.size(); ++i) {
        const auto& d = dimensions[i];
        double u = std::clamp(unit[i], 0.0, 1.0);
        double v;
        if (d.kind == DimensionKind::LogReal) {
            v = std::exp(std::log(d.lower) + u * (std::log(d.upper) - std::log(d.lower)));
        } else {
            v = d.lower + u * (d.upper - d.lower);
        }
        if (d.kind == DimensionKind::Integer) v = std::round(v);
        c[i] = v;
    }
    return c;
}

double matern52(const std::vector<double>& x1, const std::vector<double>& x2,
                double sigma2, const std::vector<double>& length_scales) {
    if (x1.size() != x2.size() || x1.size() != length_scales.size())
        throw std::invalid_argument("matern52: dimension mismatch");
    double r2 = 0;
    for (size_t i = 0; i < x1.size(); ++i) {
        double d = (x1[i] - x2[i]) / length_scales[i];
        r2 += d * d;
    }
    double r = std::sqrt(r2);
    const double s5 = 2.2360679774997896;  // sqrt(5)
    return sigma2 * (1.0 + s5 * r + 5.0 * r2 / 3.0) * std::exp(-s5 * r);
}

GpSurrogate::GpSurrogate(double sigma2, std::vector<double> length_scales,
                         double noise)
    : sigma2_(sigma2), scales_(std::move(length_scales)), noise_(noise) {}

void GpSurrogate::add(const std::vector<double>& x, double y) {
    xs_.push_back(x);
    ys_.push_back(y);
    factored_ = false;
}

void GpSurrogate::set_kernel(double sigma2, std::vector<double> length_scales,
                             double noise) {
    sigma2_ = sigma2;
    scales_ = std::move(length_scales);
    noise_ = noise;
    factored_ = false;
}

double GpSurrogate::prior_mean() const {
    if (ys_.empty()) return 0.0;
    double s = 0;
    for (double y : ys_) s += y;
    return s / static_cast<double>(ys_.size());
}

void GpSurrogate::refactor() const {
    const size_t n = ys_.size();
    chol_.assign(n * n, 0.0);
    // K + noise I, then an in-place Cholesky.
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j <= i; ++j)
            chol_[i * n + j] = matern52(xs_[i], xs_[j], sigma2_, scales_) +
                               (i == j ? noise_ : 0.0);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j <= i; ++j) {
            double s = chol_[i * n + j];
            for (size_t k = 0; k < j; ++k) s -= chol_[i * n + k] * chol_[j * n + k];
            if (i == j) {
                if (s <= 0.0)
                    throw std::runtime_error(
                        "kernel matrix not positive definite; raise the noise floor");
                chol_[i * n + j] = std::sqrt(s);
            } else {
                chol_[i * n + j] = s / chol_[j * n + j];
            }
        }
    }
    // alpha = K^-1 (y - mean) via two triangular solves.
    double mean = prior_mean();
    alpha_.assign(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        double s = ys_[i] - mean;
        for (size_t k = 0; k < i; ++k) s -= chol_[i * n + k] * alpha_[k];
        alpha_[i] = s / chol_[i * n + i];
    }
    for (size_t i = n; i-- > 0;) {
        double s = alpha_[i];
        for (size_t k = i + 1; k < n; ++k) s -= chol_[k * n + i] * alpha_[k];
        alpha_[i] = s / chol_[i * n + i];
    }
    factored_ = true;
}

std::pair<double, double> GpSurrogate::posterior(const std::vector<double>& x) const {
    if (ys_.empty()) throw std::runtime_error("posterior needs observations");
    if (!factored_) refactor();
    const size_t n = ys_.size();
    std::vector<double> k_star(n);
    for (size_t i = 0; i < n; ++i) k_star[i] = matern52(x, xs_[i], sigma2_, scales_);

    double mean = prior_mean();
    for (size_t i = 0; i < n; ++i) mean += k_star[i] * alpha_[i];

    // v = L^-1 k*, variance = k(x,x) - v.v
    std::vector<double> v(n);
    for (size_t i = 0; i < n; ++i) {
        double s = k_star[i];
        for (size_t k = 0; k < i; ++k) s -= chol_[i * n + k] * v[k];
        v[i] = s / chol_[i * n + i];
    }
    double var = sigma2_;
    for (size_t i = 0; i < n; ++i) var -= v[i] * v[i];
    return {mean, std::max(var, 0.0)};
}

double GpSurrogate::log_marginal_likelihood() const {
    if (!factored_) refactor();
    const size_t n = ys_.size();
    double mean = prior_mean();
    double fit = 0;
    for (size_t i = 0; i < n; ++i) fit += (ys_[i] - mean) * alpha_[i];
    double logdet = 0;
    for (size_t i = 0; i < n; ++i) logdet += std::log(chol_[i * n + i]);
    return -0.5 * fit - logdet -
           0.5 * static_cast<double>(n) * std::log(2.0 * 3.141592653589793);
}

double expected_improvement(double mean, double variance, double best_loss) {
    if (variance < 0) variance = 0;
    double sigma = std::sqrt(variance);
    double improvement = best_loss - mean;
    if (sigma == 0.0) return std::max(improvement, 0.0);
    double z = improvement / sigma;
    return improvement * norm_cdf(z) + sigma * norm_pdf(z);
}

namespace {

// Halton low-discrepancy points, shifted by a seeded offset (mod 1).
double halton(size_t index, int base) {
    double f = 1.0, r = 0.0;
    size_t i = index;
    while (i > 0) {
        f /= base;
        r += f * static_cast<double>(i % static_cast<size_t>(base));
        i /= static_cast<size_t>(base);
    }
    return r;
}

constexpr int kHaltonBases[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};

}  // namespace

TuneResult tune(const Objective& objective, const SearchSpace& space,
                const TuneOptions& options) {
    space.validate();
    const size_t dims = space.dimensions.size();
    if (dims > 10)
        throw std::invalid_argument("tune supports up to 10 dimensions");

    TuneResult result;
    result.best_loss = std::numeric_limits<double>::infinity();

    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> shift(dims);
    for (auto& s : shift) s = unit(rng);

    GpSurrogate gp(1.0, std::vector<double>(dims, 0.2));
    auto record = [&](int iteration, const std::vector<double>& config, double loss) {
        if (loss < result.best_loss) {
            result.best_loss = loss;
            result.best_config = config;
        }
        result.history.push_back({iteration, config, loss, result.best_loss});
        if (std::isfinite(loss)) gp.add(space.to_unit(config), loss);
    };
    auto evaluate = [&](const std::vector<double>& config) -> double {
        try {
            double loss = objective(config);
            if (std::isnan(loss)) return std::numeric_limits<double>::infinity();
            return loss;
        } catch (const std::exception&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    int total = options.iterations;
    int warmup = std::min(options.warmup, total);
    for (int it = 0; it < warmup; ++it) {
        std::vector<double> u(dims);
        for (size_t d = 0; d < dims; ++d) {
            double h = halton(static_cast<size_t>(it + 1), kHaltonBases[d]);
            u[d] = std::fmod(h + shift[d], 1.0);
        }
        std::vector<double> config = space.from_unit(u);
        record(it + 1, config, evaluate(config));
    }

    for (int it = warmup; it < total; ++it) {
        std::vector<double> next_unit(dims, 0.5);
        if (gp.size() >= 2) {
            // Marginal-likelihood grid over signal variance and a shared
            // length scale on the unit box.
            double yvar = 0, ymean = 0;
            for (const auto& h : result.history)
                if (std::isfinite(h.loss)) ymean += h.loss;
            ymean /= static_cast<double>(gp.size());
            for (const auto& h : result.history)
                if (std::isfinite(h.loss)) yvar += (h.loss - ymean) * (h.loss - ymean);
            yvar /= static_cast<double>(gp.size());
            if (yvar <= 0) yvar = 1e-8;

            double best_ml = -std::numeric_limits<double>::infinity();
            double best_s2 = yvar;
            double best_ls = 0.2;
            for (double s2 : {0.5 * yvar, yvar, 2.0 * yvar}) {
                for (double ls : {0.05, 0.1, 0.2, 0.5, 1.0, 2.0}) {
                    gp.set_kernel(s2, std::vector<double>(dims, ls),
                                  1e-10 + 1e-9 * yvar);
                    try {
                        double ml = gp.log_marginal_likelihood();
                        if (ml > best_ml) {
                            best_ml = ml;
                            best_s2 = s2;
                            best_ls = ls;
                        }
                    } catch (const std::exception&) {
                        // skip ill-conditioned grid point
                    }
                }
            }
            gp.set_kernel(best_s2, std::vector<double>(dims, best_ls),
                          1e-10 + 1e-9 * yvar);
        }

        double finite_best = std::numeric_limits<double>::infinity();
        for (const auto& h : result.history)
            if (std::isfinite(h.loss)) finite_best = std::min(finite_best, h.loss);

        double best_ei = -1.0;
        std::vector<double> best_candidate(dims, 0.5);
        auto consider = [&](const std::vector<double>& u) {
            auto [mu, var] = gp.posterior(u);
            double ei = expected_improvement(mu, var, finite_best);
            if (ei > best_ei) {
                best_ei = ei;
                best_candidate = u;
            }
        };
        if (gp.size() == 0) {
            std::vector<double> u(dims);
            for (auto& x : u) x = unit(rng);
            best_candidate = u;
        } else {
            for (int c = 0; c < options.candidates; ++c) {
                std::vector<double> u(dims);
                for (auto& x : u) x = unit(rng);
                consider(u);
            }
            // Local refinement: shrinking Gaussian perturbations around the
            // incumbent candidate.
            std::normal_distribution<double> gauss(0.0, 1.0);
            for (double radius : {0.05, 0.01, 0.002}) {
                std::vector<double> center = best_candidate;
                for (int c = 0; c < 32; ++c) {
                    std::vector<double> u(dims);
                    for (size_t d = 0; d < dims; ++d)
                        u[d] = std::clamp(center[d] + radius * gauss(rng), 0.0, 1.0);
                    consider(u);
                }
            }
        }
        next_unit = best_candidate;
        std::vector<double> config = space.from_unit(next_unit);
        record(it + 1, config, evaluate(config));
    }
    return result;
}

std::string tune_history_to_csv(const TuneResult& result, const SearchSpace& space) {
    std::string out = "iteration";
    for (const auto& d : space.dimensions) out += "," + d.name;
    out += ",loss,best_so_far\n";
    char buf[48];
    for (const auto& step : result.history) {
        out += std::to_string(step.iteration);
        for (double v : step.config) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out += std::string(",") + buf;
        }
        if (std::isfinite(step.loss)) {
            std::snprintf(buf, sizeof(buf), "%.17g", step.loss);
            out += std::string(",") + buf;
        } else {
            out += ",inf";
        }
        std::snprintf(buf, sizeof(buf), "%.17g", step.best_so_far);
        out += std::string(",") + buf;
        out += "\n";
    }
    return out;
}

}  // namespace relfeat
