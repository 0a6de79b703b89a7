#pragma once

#include <functional>
#include <span>
#include <vector>

#include "latlab/types.hpp"

namespace latlab::ad {

class Tape;

/// Trainable tensor living outside any tape. `grad` is accumulated by
/// Tape::backward for every tape the parameter was inserted into and is
/// consumed (then zeroed) by the optimizer.
struct Parameter {
    Mat value;
    Mat grad;

    Parameter() = default;
    explicit Parameter(Mat v) : value(std::move(v)) { grad = Mat::Zero(value.rows(), value.cols()); }
    void zero_grad() { grad.setZero(); }
};

/// Handle to a node on a Tape.
struct Var {
    Tape* tape = nullptr;
    int id = -1;
    bool valid() const { return tape != nullptr && id >= 0; }
};

/// Dynamic reverse-mode tape over dense 64-bit matrices. Rebuilt every
/// step; scalars are 1x1 matrices, vectors are n x 1.
class Tape {
public:
    Var constant(Mat v);
    Var constant(double v);
    /// Differentiable leaf not bound to storage; gradient readable via grad().
    Var input(Mat v);
    Var input(double v);
    /// Differentiable leaf bound to `p`; backward() adds into p.grad.
    Var param(Parameter& p);

    const Mat& val(Var v) const { return nodes_[v.id].val; }
    double scalar(Var v) const { return nodes_[v.id].val(0, 0); }
    /// Gradient of the last backward()'s loss w.r.t. node v.
    const Mat& grad(Var v) const { return nodes_[v.id].grad; }

    /// Reverse sweep from a scalar loss. Writes bound Parameter grads.
    void backward(Var loss);

    std::size_t size() const { return nodes_.size(); }

    // -- construction internals used by the op free functions --
    using BackFn = std::function<void(Tape&, int self)>;
    int emit(Mat value, bool requires_grad, BackFn back);
    bool needs_grad(int id) const { return nodes_[id].requires_grad; }
    Mat& grad_buf(int id) { return nodes_[id].grad; }
    const Mat& val_at(int id) const { return nodes_[id].val; }

private:
    struct Node {
        Mat val;
        Mat grad;
        bool requires_grad = false;
        Parameter* bound = nullptr;
        BackFn back;
    };
    std::vector<Node> nodes_;
    bool ran_backward_ = false;
};

// ---- primitives ----------------------------------------------------------

Var matmul(Var a, Var b);
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator-(Var a);
Var mul(Var a, Var b);             ///< elementwise (Eq.-13 style Hadamard)
Var smul(Var s, Var m);            ///< scalar (1x1) times matrix
Var scale(Var a, double c);
Var add_const(Var a, double c);

Var relu(Var a);
Var leaky_relu(Var a, double negative_slope);
Var hard_tanh(Var a);              ///< clamp(2w, -1, 1); slope 2 when |w| < 0.5
Var tanh(Var a);
Var atan(Var a);
Var sin(Var a);
Var cos(Var a);
Var tan(Var a);

Var softmax(Var a);                ///< column vector -> column vector
Var vcat(std::span<const Var> parts);
Var flatten(Var a);                ///< row-major flatten to column vector
Var block(Var a, int i, int j, int rows, int cols);
Var sum(Var a);
Var mean(Var a);
Var smooth_l1(Var a);              ///< elementwise: 0.5e^2 if |e|<1 else |e|-0.5

}  // namespace latlab::ad
