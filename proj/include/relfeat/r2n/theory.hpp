#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "relfeat/r2n/tensor.hpp"

namespace relfeat::r2n {

// Linear-activation recurrent network h_t = b + H h_{t-1} + W x_t,
// o_t = c + U h_t. The expressiveness analysis concerns when this is a set
// function of its inputs.
struct LinearRnnSpec {
    Mat W, H, U;   // input, recurrence and output maps
    Mat b, c, h0;  // 1 x n row vectors

    static LinearRnnSpec scalar(double w, double h, double u, double b = 0,
                                double c = 0, double h0 = 0);
};

// Output after feeding the whole sequence; the empty sequence yields
// c + U h0.
std::vector<double> linear_rnn_unroll(const LinearRnnSpec& spec,
                                      const std::vector<std::vector<double>>& inputs);

// Closed form for the H = I case: c + U h0 + |s| U b + U W sum(s).
std::vector<double> linear_rnn_closed_form(const LinearRnnSpec& spec,
                                           const std::vector<std::vector<double>>& set);

struct InvarianceReport {
    bool certified_invariant;
    // First violating pair, when any: the two inputs, the order gap, and the
    // identity value U (H - I) W (x0 - x1) it must match for scalar specs.
    struct Counterexample {
        std::vector<double> x0, x1;
        double delta;
        double identity_value;
    };
    std::optional<Counterexample> counterexample;
};

// Random two-element sets evaluated in both orders; any gap above 1e-9 is a
// counterexample. Scalar specs also check the proof identity
// delta = U (H - 1) W (x0 - x1).
InvarianceReport check_set_invariance(const LinearRnnSpec& spec, int trials,
                                      uint64_t seed);

}  // namespace relfeat::r2n
