#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "relfeat/r2n/tensor.hpp"

namespace relfeat::r2n {

// Reverse-mode autodiff over a dynamically built graph. Values are computed
// eagerly; backward() replays the tape in reverse, accumulating gradients.
class Tape {
public:
    using Id = int;

    Id input(Mat value, std::string name = {});
    const Mat& value(Id id) const { return nodes_[static_cast<size_t>(id)].value; }
    const Mat& grad(Id id) const { return nodes_[static_cast<size_t>(id)].grad; }

    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id mul(Id a, Id b);  // elementwise
    Id matmul(Id a, Id b);
    Id add_rowvec(Id a, Id bias);           // bias is 1 x c, broadcast per row
    Id broadcast_rows(Id rowvec, int rows); // tile a 1 x c vector
    Id scale(Id a, double s);
    Id tanh_op(Id a);
    Id sigmoid_op(Id a);
    Id relu_op(Id a);
    Id slice_cols(Id a, int c0, int c1);
    Id concat_cols(const std::vector<Id>& parts);

    struct RowRef {
        Id node;
        int row;
    };
    // New matrix whose row i copies refs[i]; gradients scatter back.
    Id stack_rows(const std::vector<RowRef>& refs);

    // out.row(i) = mask[i] * a.row(i) + (1 - mask[i]) * b.row(i)
    Id mix_rows(Id a, Id b, std::vector<double> mask);

    // Mean cross-entropy of row-wise softmax against integer class labels.
    Id softmax_cross_entropy(Id logits, std::vector<int> labels);
    // Row-wise softmax probabilities (forward-only convenience).
    static Mat softmax(const Mat& logits);
    // Mean squared error of an n x 1 prediction column against targets.
    Id mean_squared_error(Id pred, std::vector<double> targets);

    // Seeds d(loss)/d(loss) = 1 and propagates. The loss must be 1 x 1.
    void backward(Id loss);

    void check_finite(Id id, const std::string& what) const;

private:
    struct Node {
        Mat value;
        Mat grad;
        std::string name;
        std::function<void(Tape&)> back;
    };
    Id push(Mat value, std::function<void(Tape&)> back, std::string name = {});
    Mat& grad_ref(Id id) { return nodes_[static_cast<size_t>(id)].grad; }

    std::vector<Node> nodes_;
};

}  // namespace relfeat::r2n
