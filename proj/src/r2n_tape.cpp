#include "relfeat/r2n/tape.hpp"

#include <cmath>

namespace relfeat::r2n {

void xavier_fill(Mat& m, std::mt19937_64& rng) {
    double limit = std::sqrt(6.0 / (m.rows + m.cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& v : m.a) v = dist(rng);
}

Tape::Id Tape::push(Mat value, std::function<void(Tape&)> back, std::string name) {
    Node n;
    n.value = std::move(value);
    n.grad = Mat(n.value.rows, n.value.cols);
    n.name = std::move(name);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::input(Mat value, std::string name) {
    return push(std::move(value), nullptr, std::move(name));
}

Tape::Id Tape::add(Id a, Id b) {
    const Mat& A = value(a);
    const Mat& B = value(b);
    Mat out = A;
    for (size_t i = 0; i < out.a.size(); ++i) out.a[i] += B.a[i];
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [a, b, id](Tape& t) {
        const Mat& g = t.grad(id);
        Mat& ga = t.grad_ref(a);
        Mat& gb = t.grad_ref(b);
        for (size_t i = 0; i < g.a.size(); ++i) {
            ga.a[i] += g.a[i];
            gb.a[i] += g.a[i];
        }
    };
    return id;
}

Tape::Id Tape::sub(Id a, Id b) {
    const Mat& A = value(a);
    const Mat& B = value(b);
    Mat out = A;
    for (size_t i = 0; i < out.a.size(); ++i) out.a[i] -= B.a[i];
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [a, b, id](Tape& t) {
        const Mat& g = t.grad(id);
        Mat& ga = t.grad_ref(a);
        Mat& gb = t.grad_ref(b);
        for (size_t i = 0; i < g.a.size(); ++i) {
            ga.a[i] += g.a[i];
            gb.a[i] -= g.a[i];
        }
    };
    return id;
}

Tape::Id Tape::mul(Id a, Id b) {
    const Mat& A = value(a);
    const Mat& B = value(b);
    Mat out = A;
    for (size_t i = 0; i < out.a.size(); ++i) out.a[i] *= B.a[i];
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [a, b, id](Tape& t) {
        const Mat& g = t.grad(id);
        const Mat& A_ = t.value(a);
        const Mat& B_ = t.value(b);
        Mat& ga = t.grad_ref(a);
        Mat& gb = t.grad_ref(b);
        for (size_t i = 0; i < g.a.size(); ++i) {
            ga.a[i] += g.a[i] * B_.a[i];
            gb.a[i] += g.a[i] * A_.a[i];
        }
    };
    return id;
}

Tape::Id Tape::matmul(Id a, Id b) {
    const Mat& A = value(a);
    const Mat& B = value(b);
    if (A.cols != B.rows) throw std::invalid_argument("matmul shape mismatch");
    Mat out(A.rows, B.cols);
    for (int i = 0; i < A.rows; ++i)
        for (int k = 0; k < A.cols; ++k) {
            double av = A.at(i, k);
            if (av == 0.0) continue;
            for (int j = 0; j < B.cols; ++j) out.at(i, j) += av * B.at(k, j);
        }
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [a, b, id](Tape& t) {
        const Mat& g = t.grad(id);
        const Mat& A_ = t.value(a);
        const Mat& B_ = t.value(b);
        Mat& ga = t.grad_ref(a);
        Mat& gb = t.grad_ref(b);
        // dA = g B^T ; dB = A^T g
        for (int i = 0; i < A_.rows; ++i)
            for (int k = 0; k < A_.cols; ++k) {
                double s = 0;
                for (int j = 0; j < B_.cols; ++j) s += g.at(i, j) * B_.at(k, j);
                ga.at(i, k) += s;
            }
        for (int k = 0; k < B_.rows; ++k)
            for (int j = 0; j < B_.cols; ++j) {
                double s = 0;
                for (int i = 0; i < A_.rows; ++i) s += A_.at(i, k) * g.at(i, j);
                gb.at(k, j) += s;
            }
    };
    return id;
}

Tape::Id Tape::add_rowvec(Id a, Id bias) {
    const Mat& A = value(a);
    const Mat& B = value(bias);
    if (B.rows != 1 || B.cols != A.cols)
        throw std::invalid_argument("add_rowvec shape mismatch");
    Mat out = A;
    for (int i = 0; i < A.rows; ++i)
        for (int j = 0; j < A.cols; ++j) out.at(i, j) += B.at(0, j);
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [a, bias, id](Tape& t) {
        const Mat& g = t.grad(id);
        Mat& ga = t.grad_ref(a);
        Mat& gb = t.grad_ref(bias);
        for (int i = 0; i < g.rows; ++i)
            for (int j = 0; j < g.cols; ++j) {
                ga.at(i, j) += g.at(i, j);
                gb.at(0, j) += g.at(i, j);
            }
    };
    return id;
}

Tape::Id Tape::broadcast_rows(Id rowvec, int rows) {
    const Mat& V = value(rowvec);
    if (V.rows != 1) throw std::invalid_argument("broadcast_rows expects 1 x c");
    Mat out(rows, V.cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < V.cols; ++j) out.at(i, j) = V.at(0, j);
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [rowvec, id](Tape& t) {
        const Mat& g = t.grad(id);
        Mat& gv = t.grad_ref(rowvec);
        for (int i = 0; i < g.rows; ++i)
            for (int j = 0; j < g.cols; ++j) gv.at(0, j) += g.at(i, j);
    };
    return id;
}

Tape::Id Tape::scale(Id a, double s) {
    Mat out = value(a);
    for (auto& v : out.a) v *= s;
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [a, s, id](Tape& t) {
        const Mat& g = t.grad(id);
        Mat& ga = t.grad_ref(a);
        for (size_t i = 0; i < g.a.size(); ++i) ga.a[i] += s * g.a[i];
    };
    return id;
}

Tape::Id Tape::tanh_op(Id a) {
    Mat out = value(a);
    for (auto& v : out.a) v = std::tanh(v);
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [a, id](Tape& t) {
        const Mat& g = t.grad(id);
        const Mat& y = t.value(id);
        Mat& ga = t.grad_ref(a);
        for (size_t i = 0; i < g.a.size(); ++i)
            ga.a[i] += g.a[i] * (1.0 - y.a[i] * y.a[i]);
    };
    return id;
}

Tape::Id Tape::sigmoid_op(Id a) {
    Mat out = value(a);
    for (auto& v : out.a) v = 1.0 / (1.0 + std::exp(-v));
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [a, id](Tape& t) {
        const Mat& g = t.grad(id);
        const Mat& y = t.value(id);
        Mat& ga = t.grad_ref(a);
        for (size_t i = 0; i < g.a.size(); ++i)
            ga.a[i] += g.a[i] * y.a[i] * (1.0 - y.a[i]);
    };
    return id;
}

Tape::Id Tape::relu_op(Id a) {
    Mat out = value(a);
    for (auto& v : out.a) v = v > 0 ? v : 0.0;
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [a, id](Tape& t) {
        const Mat& g = t.grad(id);
        const Mat& x = t.value(a);
        Mat& ga = t.grad_ref(a);
        for (size_t i = 0; i < g.a.size(); ++i)
            if (x.a[i] > 0) ga.a[i] += g.a[i];
    };
    return id;
}

Tape::Id Tape::slice_cols(Id a, int c0, int c1) {
    const Mat& A = value(a);
    Mat out(A.rows, c1 - c0);
    for (int i = 0; i < A.rows; ++i)
        for (int j = c0; j < c1; ++j) out.at(i, j - c0) = A.at(i, j);
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [a, c0, c1, id](Tape& t) {
        const Mat& g = t.grad(id);
        Mat& ga = t.grad_ref(a);
        for (int i = 0; i < g.rows; ++i)
            for (int j = c0; j < c1; ++j) ga.at(i, j) += g.at(i, j - c0);
    };
    return id;
}

Tape::Id Tape::concat_cols(const std::vector<Id>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols of nothing");
    int rows = value(parts[0]).rows;
    int cols = 0;
    for (Id p : parts) {
        if (value(p).rows != rows)
            throw std::invalid_argument("concat_cols row mismatch");
        cols += value(p).cols;
    }
    Mat out(rows, cols);
    int at = 0;
    for (Id p : parts) {
        const Mat& P = value(p);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < P.cols; ++j) out.at(i, at + j) = P.at(i, j);
        at += P.cols;
    }
    Id id = push(std::move(out), nullptr);
    std::vector<Id> captured = parts;
    nodes_[static_cast<size_t>(id)].back = [captured, id](Tape& t) {
        const Mat& g = t.grad(id);
        int at_ = 0;
        for (Id p : captured) {
            Mat& gp = t.grad_ref(p);
            for (int i = 0; i < gp.rows; ++i)
                for (int j = 0; j < gp.cols; ++j) gp.at(i, j) += g.at(i, at_ + j);
            at_ += gp.cols;
        }
    };
    return id;
}

Tape::Id Tape::stack_rows(const std::vector<RowRef>& refs) {
    if (refs.empty()) throw std::invalid_argument("stack_rows of nothing");
    int cols = value(refs[0].node).cols;
    Mat out(static_cast<int>(refs.size()), cols);
    for (size_t i = 0; i < refs.size(); ++i) {
        const Mat& src = value(refs[i].node);
        for (int j = 0; j < cols; ++j)
            out.at(static_cast<int>(i), j) = src.at(refs[i].row, j);
    }
    Id id = push(std::move(out), nullptr);
    std::vector<RowRef> captured = refs;
    nodes_[static_cast<size_t>(id)].back = [captured, id](Tape& t) {
        const Mat& g = t.grad(id);
        for (size_t i = 0; i < captured.size(); ++i) {
            Mat& gs = t.grad_ref(captured[i].node);
            for (int j = 0; j < g.cols; ++j)
                gs.at(captured[i].row, j) += g.at(static_cast<int>(i), j);
        }
    };
    return id;
}

Tape::Id Tape::mix_rows(Id a, Id b, std::vector<double> mask) {
    const Mat& A = value(a);
    const Mat& B = value(b);
    Mat out(A.rows, A.cols);
    for (int i = 0; i < A.rows; ++i) {
        double m = mask[static_cast<size_t>(i)];
        for (int j = 0; j < A.cols; ++j)
            out.at(i, j) = m * A.at(i, j) + (1.0 - m) * B.at(i, j);
    }
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [a, b, mask = std::move(mask), id](Tape& t) {
        const Mat& g = t.grad(id);
        Mat& ga = t.grad_ref(a);
        Mat& gb = t.grad_ref(b);
        for (int i = 0; i < g.rows; ++i) {
            double m = mask[static_cast<size_t>(i)];
            for (int j = 0; j < g.cols; ++j) {
                ga.at(i, j) += m * g.at(i, j);
                gb.at(i, j) += (1.0 - m) * g.at(i, j);
            }
        }
    };
    return id;
}

Mat Tape::softmax(const Mat& logits) {
    Mat out(logits.rows, logits.cols);
    for (int i = 0; i < logits.rows; ++i) {
        double mx = logits.at(i, 0);
        for (int j = 1; j < logits.cols; ++j) mx = std::max(mx, logits.at(i, j));
        double z = 0;
        for (int j = 0; j < logits.cols; ++j) {
            out.at(i, j) = std::exp(logits.at(i, j) - mx);
            z += out.at(i, j);
        }
        for (int j = 0; j < logits.cols; ++j) out.at(i, j) /= z;
    }
    return out;
}

Tape::Id Tape::softmax_cross_entropy(Id logits, std::vector<int> labels) {
    const Mat& L = value(logits);
    if (static_cast<int>(labels.size()) != L.rows)
        throw std::invalid_argument("label count mismatch");
    Mat probs = softmax(L);
    double loss = 0;
    for (int i = 0; i < L.rows; ++i) {
        double p = probs.at(i, labels[static_cast<size_t>(i)]);
        loss -= std::log(std::max(p, 1e-300));
    }
    loss /= L.rows;
    Mat out(1, 1);
    out.at(0, 0) = loss;
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back =
        [logits, labels = std::move(labels), probs = std::move(probs), id](Tape& t) {
            double g = t.grad(id).at(0, 0);
            Mat& gl = t.grad_ref(logits);
            double inv = g / gl.rows;
            for (int i = 0; i < gl.rows; ++i)
                for (int j = 0; j < gl.cols; ++j) {
                    double delta = (j == labels[static_cast<size_t>(i)]) ? 1.0 : 0.0;
                    gl.at(i, j) += inv * (probs.at(i, j) - delta);
                }
        };
    return id;
}

Tape::Id Tape::mean_squared_error(Id pred, std::vector<double> targets) {
    const Mat& P = value(pred);
    if (P.cols != 1 || static_cast<int>(targets.size()) != P.rows)
        throw std::invalid_argument("mean_squared_error shape mismatch");
    double loss = 0;
    for (int i = 0; i < P.rows; ++i) {
        double d = P.at(i, 0) - targets[static_cast<size_t>(i)];
        loss += d * d;
    }
    loss /= P.rows;
    Mat out(1, 1);
    out.at(0, 0) = loss;
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [pred, targets = std::move(targets), id](Tape& t) {
        double g = t.grad(id).at(0, 0);
        const Mat& P_ = t.value(pred);
        Mat& gp = t.grad_ref(pred);
        double inv = 2.0 * g / P_.rows;
        for (int i = 0; i < P_.rows; ++i)
            gp.at(i, 0) += inv * (P_.at(i, 0) - targets[static_cast<size_t>(i)]);
    };
    return id;
}

void Tape::backward(Id loss) {
    Node& last = nodes_[static_cast<size_t>(loss)];
    if (last.value.rows != 1 || last.value.cols != 1)
        throw std::invalid_argument("backward expects a scalar loss");
    last.grad.at(0, 0) = 1.0;
    for (size_t i = nodes_.size(); i-- > 0;) {
        if (nodes_[i].back) nodes_[i].back(*this);
    }
}

void Tape::check_finite(Id id, const std::string& what) const {
    for (double v : value(id).a)
        if (!std::isfinite(v))
            throw std::runtime_error("non-finite value in " + what);
}

}  // namespace relfeat::r2n
