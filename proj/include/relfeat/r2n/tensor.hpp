#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace relfeat::r2n {

// Dense row-major matrix of doubles. Vectors are 1 x n.
struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
    size_t size() const { return a.size(); }

    static Mat zeros(int r, int c) { return Mat(r, c); }
    static Mat row(const std::vector<double>& v) {
        Mat m(1, static_cast<int>(v.size()));
        m.a = v;
        return m;
    }
};

// Xavier-uniform fill: U(-sqrt(6/(fan_in+fan_out)), +).
void xavier_fill(Mat& m, std::mt19937_64& rng);

}  // namespace relfeat::r2n
