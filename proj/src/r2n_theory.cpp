#include "relfeat/r2n/theory.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace relfeat::r2n {

namespace {

std::vector<double> mat_vec(const Mat& m, const std::vector<double>& v) {
    // v treated as a row vector: out = v * m
    std::vector<double> out(static_cast<size_t>(m.cols), 0.0);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j)
            out[static_cast<size_t>(j)] += v[static_cast<size_t>(i)] * m.at(i, j);
    return out;
}

std::vector<double> row_of(const Mat& m) {
    return m.a;
}

std::vector<double> add_vec(std::vector<double> a, const std::vector<double>& b) {
    for (size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

}  // namespace

LinearRnnSpec LinearRnnSpec::scalar(double w, double h, double u, double b,
                                    double c, double h0) {
    LinearRnnSpec s;
    s.W = Mat(1, 1);
    s.W.at(0, 0) = w;
    s.H = Mat(1, 1);
    s.H.at(0, 0) = h;
    s.U = Mat(1, 1);
    s.U.at(0, 0) = u;
    s.b = Mat(1, 1);
    s.b.at(0, 0) = b;
    s.c = Mat(1, 1);
    s.c.at(0, 0) = c;
    s.h0 = Mat(1, 1);
    s.h0.at(0, 0) = h0;
    return s;
}

std::vector<double> linear_rnn_unroll(const LinearRnnSpec& spec,
                                      const std::vector<std::vector<double>>& inputs) {
    std::vector<double> h = row_of(spec.h0);
    for (const auto& x : inputs)
        h = add_vec(add_vec(row_of(spec.b), mat_vec(spec.H, h)), mat_vec(spec.W, x));
    return add_vec(row_of(spec.c), mat_vec(spec.U, h));
}

std::vector<double> linear_rnn_closed_form(const LinearRnnSpec& spec,
                                           const std::vector<std::vector<double>>& set) {
    for (int i = 0; i < spec.H.rows; ++i)
        for (int j = 0; j < spec.H.cols; ++j)
            if (spec.H.at(i, j) != (i == j ? 1.0 : 0.0))
                throw std::invalid_argument("closed form requires H = identity");

    std::vector<double> sum(static_cast<size_t>(spec.W.rows), 0.0);
    for (const auto& x : set)
        for (size_t i = 0; i < sum.size(); ++i) sum[i] += x[i];

    std::vector<double> out = add_vec(row_of(spec.c), mat_vec(spec.U, row_of(spec.h0)));
    std::vector<double> bU = mat_vec(spec.U, row_of(spec.b));
    for (size_t i = 0; i < out.size(); ++i)
        out[i] += static_cast<double>(set.size()) * bU[i];
    return add_vec(std::move(out), mat_vec(spec.U, mat_vec(spec.W, sum)));
}

InvarianceReport check_set_invariance(const LinearRnnSpec& spec, int trials,
                                      uint64_t seed) {
    InvarianceReport report;
    report.certified_invariant = true;

    const bool is_scalar = spec.W.rows == 1 && spec.W.cols == 1 &&
                           spec.H.rows == 1 && spec.H.cols == 1 &&
                           spec.U.rows == 1 && spec.U.cols == 1;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    const size_t width = static_cast<size_t>(spec.W.rows);

    for (int t = 0; t < trials; ++t) {
        std::vector<double> x0(width), x1(width);
        for (auto& v : x0) v = dist(rng);
        for (auto& v : x1) v = dist(rng);

        std::vector<double> ab = linear_rnn_unroll(spec, {x0, x1});
        std::vector<double> ba = linear_rnn_unroll(spec, {x1, x0});
        double delta = 0;
        for (size_t i = 0; i < ab.size(); ++i)
            delta = std::max(delta, std::fabs(ab[i] - ba[i]));

        if (delta > 1e-9) {
            report.certified_invariant = false;
            InvarianceReport::Counterexample ce;
            ce.x0 = x0;
            ce.x1 = x1;
            ce.delta = ab[0] - ba[0];
            ce.identity_value =
                is_scalar ? spec.U.at(0, 0) * (spec.H.at(0, 0) - 1.0) *
                                spec.W.at(0, 0) * (x0[0] - x1[0])
                          : 0.0;
            report.counterexample = ce;
            return report;
        }
    }
    return report;
}

}  // namespace relfeat::r2n
