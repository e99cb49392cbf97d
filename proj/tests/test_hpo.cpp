#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "relfeat/hpo.hpp"
#include "relfeat/stats.hpp"

using namespace relfeat;

TEST_CASE("matern 5/2: zero distance, decay to zero, the r = 1 value") {
    std::vector<double> ls{1.0};
    CHECK(matern52({0.4}, {0.4}, 2.5, ls) == doctest::Approx(2.5));

    CHECK(matern52({0.0}, {50.0}, 1.0, ls) < 1e-10);

    // r = 1: (1 + sqrt5 + 5/3) exp(-sqrt5)
    double s5 = std::sqrt(5.0);
    double expected = (1.0 + s5 + 5.0 / 3.0) * std::exp(-s5);
    CHECK(matern52({0.0}, {1.0}, 1.0, ls) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(0.5240).epsilon(1e-3));

    // symmetry
    CHECK(matern52({0.1, 0.7}, {0.9, 0.2}, 1.3, {0.5, 0.5}) ==
          doctest::Approx(matern52({0.9, 0.2}, {0.1, 0.7}, 1.3, {0.5, 0.5})));
}

TEST_CASE("gp posterior interpolates noise-free observations") {
    GpSurrogate gp(1.0, {0.3}, 1e-12);
    gp.add({0.1}, 3.0);
    gp.add({0.5}, -1.0);
    gp.add({0.9}, 2.0);
    for (auto [x, y] : {std::pair{0.1, 3.0}, {0.5, -1.0}, {0.9, 2.0}}) {
        auto [mean, var] = gp.posterior({x});
        CHECK(mean == doctest::Approx(y).epsilon(1e-8));
        CHECK(var >= 0.0);
        CHECK(var <= 1e-6);
    }
}

TEST_CASE("gp posterior far from data reverts to the prior") {
    GpSurrogate gp(0.8, {0.05}, 1e-10);
    gp.add({0.1}, 2.0);
    gp.add({0.2}, 4.0);
    auto [mean, var] = gp.posterior({50.0});
    CHECK(mean == doctest::Approx(gp.prior_mean()).epsilon(1e-3));
    CHECK(var == doctest::Approx(0.8).epsilon(1e-3));
    CHECK(gp.prior_mean() == doctest::Approx(3.0));
}

TEST_CASE("duplicate observations survive through the noise floor") {
    GpSurrogate gp(1.0, {0.2}, 1e-8);
    gp.add({0.5}, 1.0);
    gp.add({0.5}, 1.0);
    auto [mean, var] = gp.posterior({0.5});
    CHECK(std::isfinite(mean));
    CHECK(var >= 0.0);
}

TEST_CASE("a zero noise floor on duplicates reports the factorization failure") {
    GpSurrogate gp(1.0, {0.2}, 0.0);
    gp.add({0.5}, 1.0);
    gp.add({0.5}, 2.0);
    CHECK_THROWS_WITH(gp.posterior({0.1}), doctest::Contains("noise floor"));
}

TEST_CASE("expected improvement closed-form spot checks") {
    CHECK(expected_improvement(5.0, 0.0, 4.0) == 0.0);   // worse mean, no variance
    CHECK(expected_improvement(3.0, 0.0, 4.0) == 1.0);   // certain improvement
    CHECK(expected_improvement(4.0, 1.0, 4.0) ==
          doctest::Approx(norm_pdf(0.0)).epsilon(1e-12));  // phi(0) ~ 0.39894
    CHECK(norm_pdf(0.0) == doctest::Approx(0.39894).epsilon(1e-4));
    // nonnegative over a sweep
    for (double mu = -3; mu <= 3; mu += 0.25)
        for (double var = 0; var <= 4; var += 0.5)
            CHECK(expected_improvement(mu, var, 0.0) >= 0.0);
}

TEST_CASE("tune finds the quadratic minimum within budget") {
    SearchSpace space;
    space.dimensions = {{"x", DimensionKind::Real, 0.0, 1.0}};
    Objective objective = [](const std::vector<double>& c) {
        return (c[0] - 0.3) * (c[0] - 0.3);
    };
    TuneOptions options;
    options.iterations = 50;
    options.seed = 7;
    TuneResult result = tune(objective, space, options);
    CHECK(std::fabs(result.best_config[0] - 0.3) <= 0.05);
    CHECK(result.history.size() == 50);
}

TEST_CASE("single-evaluation budget returns the lone warm-up point") {
    SearchSpace space;
    space.dimensions = {{"x", DimensionKind::Real, 0.0, 1.0}};
    int calls = 0;
    Objective objective = [&](const std::vector<double>&) {
        ++calls;
        return 1.0;
    };
    TuneOptions options;
    options.iterations = 1;
    options.warmup = 1;
    TuneResult result = tune(objective, space, options);
    CHECK(calls == 1);
    CHECK(result.history.size() == 1);
    CHECK(result.best_config == result.history[0].config);
}

TEST_CASE("identical seeds give identical histories; best-so-far never rises") {
    SearchSpace space;
    space.dimensions = {{"a", DimensionKind::Real, -1.0, 1.0},
                        {"b", DimensionKind::LogReal, 1e-3, 10.0}};
    Objective objective = [](const std::vector<double>& c) {
        return c[0] * c[0] + std::log(c[1]) * std::log(c[1]) * 0.1;
    };
    TuneOptions options;
    options.iterations = 25;
    options.seed = 99;
    TuneResult a = tune(objective, space, options);
    TuneResult b = tune(objective, space, options);
    REQUIRE(a.history.size() == b.history.size());
    double best = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].config == b.history[i].config);
        CHECK(a.history[i].loss == b.history[i].loss);
        CHECK(a.history[i].best_so_far <= best + 1e-18);
        best = a.history[i].best_so_far;
    }
}

TEST_CASE("objective failures record +inf and the loop continues") {
    SearchSpace space;
    space.dimensions = {{"x", DimensionKind::Real, 0.0, 1.0}};
    int calls = 0;
    Objective objective = [&](const std::vector<double>& c) {
        ++calls;
        if (calls <= 2) throw std::runtime_error("flaky");
        return (c[0] - 0.5) * (c[0] - 0.5);
    };
    TuneOptions options;
    options.iterations = 12;
    TuneResult result = tune(objective, space, options);
    CHECK(result.history.size() == 12);
    CHECK(std::isinf(result.history[0].loss));
    CHECK(std::isfinite(result.best_loss));
}

TEST_CASE("integer dimensions land on whole numbers") {
    SearchSpace space;
    space.dimensions = {{"n", DimensionKind::Integer, 1.0, 20.0}};
    Objective objective = [](const std::vector<double>& c) {
        return std::fabs(c[0] - 7.0);
    };
    TuneOptions options;
    options.iterations = 15;
    TuneResult result = tune(objective, space, options);
    for (const auto& step : result.history)
        CHECK(step.config[0] == std::round(step.config[0]));
}

TEST_CASE("search space validation rejects bad bounds") {
    SearchSpace bad1;
    bad1.dimensions = {{"x", DimensionKind::Real, 1.0, 1.0}};
    CHECK_THROWS(bad1.validate());
    SearchSpace bad2;
    bad2.dimensions = {{"x", DimensionKind::LogReal, 0.0, 1.0}};
    CHECK_THROWS(bad2.validate());

    SearchSpace ok;
    ok.dimensions = {{"x", DimensionKind::LogReal, 1e-4, 1.0}};
    ok.validate();
    // log scaling round-trips
    auto unit = ok.to_unit({1e-2});
    auto back = ok.from_unit(unit);
    CHECK(back[0] == doctest::Approx(1e-2).epsilon(1e-12));
}

TEST_CASE("history csv lists every iteration with a best-so-far column") {
    SearchSpace space;
    space.dimensions = {{"x", DimensionKind::Real, 0.0, 1.0}};
    TuneOptions options;
    options.iterations = 6;
    TuneResult result =
        tune([](const std::vector<double>& c) { return c[0]; }, space, options);
    std::string csv = tune_history_to_csv(result, space);
    CHECK(csv.rfind("iteration,x,loss,best_so_far\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
}
