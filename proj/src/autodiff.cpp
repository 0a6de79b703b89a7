#include "latlab/autodiff.hpp"

#include <stdexcept>

namespace latlab::ad {

namespace {

void check_same_shape(const Mat& a, const Mat& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument(std::string(op) + ": shape mismatch (" +
                                    std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                                    std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
}

void check_same_tape(Var a, Var b, const char* op) {
    if (a.tape != b.tape) throw std::invalid_argument(std::string(op) + ": operands on different tapes");
}

}  // namespace

int Tape::emit(Mat value, bool requires_grad, BackFn back) {
    Node n;
    n.val = std::move(value);
    n.requires_grad = requires_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Var Tape::constant(Mat v) { return {this, emit(std::move(v), false, nullptr)}; }

Var Tape::constant(double v) { return constant(Mat::Constant(1, 1, v)); }

Var Tape::input(Mat v) { return {this, emit(std::move(v), true, nullptr)}; }

Var Tape::input(double v) { return input(Mat::Constant(1, 1, v)); }

Var Tape::param(Parameter& p) {
    int id = emit(p.value, true, nullptr);
    nodes_[id].bound = &p;
    return {this, id};
}

void Tape::backward(Var loss) {
    if (loss.tape != this) throw std::invalid_argument("backward: loss from a different tape");
    if (loss.id < 0 || loss.id >= static_cast<int>(nodes_.size()))
        throw std::invalid_argument("backward: invalid loss node");
    const Mat& lv = nodes_[loss.id].val;
    if (lv.rows() != 1 || lv.cols() != 1) throw std::invalid_argument("backward: loss must be scalar");

    for (auto& n : nodes_) {
        if (n.requires_grad)
            n.grad = Mat::Zero(n.val.rows(), n.val.cols());
        else
            n.grad.resize(0, 0);
    }
    if (!nodes_[loss.id].requires_grad) return;  // loss independent of any differentiable leaf
    nodes_[loss.id].grad(0, 0) = 1.0;

    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[i];
        if (!n.requires_grad) continue;
        if (n.back) n.back(*this, i);
        if (n.bound) n.bound->grad += n.grad;
    }
    ran_backward_ = true;
}

// ---- op helpers -----------------------------------------------------------

namespace {

// Emit a node whose gradient flows to a single parent through an
// elementwise local derivative computed from the parent value.
Var unary_elementwise(Var a, Mat value, std::function<Mat(const Mat&)> dfn) {
    Tape& t = *a.tape;
    int pid = a.id;
    bool rg = t.needs_grad(pid);
    int id = t.emit(std::move(value), rg,
                    rg ? Tape::BackFn([pid, dfn = std::move(dfn)](Tape& t, int self) {
                        t.grad_buf(pid).array() += t.grad_buf(self).array() * dfn(t.val_at(pid)).array();
                    })
                       : Tape::BackFn(nullptr));
    return {&t, id};
}

}  // namespace

Var matmul(Var a, Var b) {
    check_same_tape(a, b, "matmul");
    Tape& t = *a.tape;
    const Mat& av = t.val(a);
    const Mat& bv = t.val(b);
    if (av.cols() != bv.rows())
        throw std::invalid_argument("matmul: inner dims " + std::to_string(av.cols()) + " vs " +
                                    std::to_string(bv.rows()));
    bool rg = t.needs_grad(a.id) || t.needs_grad(b.id);
    int ai = a.id, bi = b.id;
    int id = t.emit(av * bv, rg, rg ? Tape::BackFn([ai, bi](Tape& t, int self) {
        const Mat& g = t.grad_buf(self);
        if (t.needs_grad(ai)) t.grad_buf(ai) += g * t.val_at(bi).transpose();
        if (t.needs_grad(bi)) t.grad_buf(bi) += t.val_at(ai).transpose() * g;
    }) : Tape::BackFn(nullptr));
    return {&t, id};
}

Var operator+(Var a, Var b) {
    check_same_tape(a, b, "add");
    Tape& t = *a.tape;
    check_same_shape(t.val(a), t.val(b), "add");
    bool rg = t.needs_grad(a.id) || t.needs_grad(b.id);
    int ai = a.id, bi = b.id;
    int id = t.emit(t.val(a) + t.val(b), rg, rg ? Tape::BackFn([ai, bi](Tape& t, int self) {
        if (t.needs_grad(ai)) t.grad_buf(ai) += t.grad_buf(self);
        if (t.needs_grad(bi)) t.grad_buf(bi) += t.grad_buf(self);
    }) : Tape::BackFn(nullptr));
    return {&t, id};
}

Var operator-(Var a, Var b) {
    check_same_tape(a, b, "sub");
    Tape& t = *a.tape;
    check_same_shape(t.val(a), t.val(b), "sub");
    bool rg = t.needs_grad(a.id) || t.needs_grad(b.id);
    int ai = a.id, bi = b.id;
    int id = t.emit(t.val(a) - t.val(b), rg, rg ? Tape::BackFn([ai, bi](Tape& t, int self) {
        if (t.needs_grad(ai)) t.grad_buf(ai) += t.grad_buf(self);
        if (t.needs_grad(bi)) t.grad_buf(bi) -= t.grad_buf(self);
    }) : Tape::BackFn(nullptr));
    return {&t, id};
}

Var operator-(Var a) { return scale(a, -1.0); }

Var mul(Var a, Var b) {
    check_same_tape(a, b, "mul");
    Tape& t = *a.tape;
    check_same_shape(t.val(a), t.val(b), "mul");
    bool rg = t.needs_grad(a.id) || t.needs_grad(b.id);
    int ai = a.id, bi = b.id;
    int id = t.emit(t.val(a).cwiseProduct(t.val(b)), rg, rg ? Tape::BackFn([ai, bi](Tape& t, int self) {
        const Mat& g = t.grad_buf(self);
        if (t.needs_grad(ai)) t.grad_buf(ai).array() += g.array() * t.val_at(bi).array();
        if (t.needs_grad(bi)) t.grad_buf(bi).array() += g.array() * t.val_at(ai).array();
    }) : Tape::BackFn(nullptr));
    return {&t, id};
}

Var smul(Var s, Var m) {
    check_same_tape(s, m, "smul");
    Tape& t = *s.tape;
    const Mat& sv = t.val(s);
    if (sv.rows() != 1 || sv.cols() != 1) throw std::invalid_argument("smul: scale must be 1x1");
    bool rg = t.needs_grad(s.id) || t.needs_grad(m.id);
    int si = s.id, mi = m.id;
    int id = t.emit(sv(0, 0) * t.val(m), rg, rg ? Tape::BackFn([si, mi](Tape& t, int self) {
        const Mat& g = t.grad_buf(self);
        if (t.needs_grad(si)) t.grad_buf(si)(0, 0) += g.cwiseProduct(t.val_at(mi)).sum();
        if (t.needs_grad(mi)) t.grad_buf(mi) += t.val_at(si)(0, 0) * g;
    }) : Tape::BackFn(nullptr));
    return {&t, id};
}

Var scale(Var a, double c) {
    Tape& t = *a.tape;
    bool rg = t.needs_grad(a.id);
    int ai = a.id;
    int id = t.emit(c * t.val(a), rg, rg ? Tape::BackFn([ai, c](Tape& t, int self) {
        t.grad_buf(ai) += c * t.grad_buf(self);
    }) : Tape::BackFn(nullptr));
    return {&t, id};
}

Var add_const(Var a, double c) {
    Tape& t = *a.tape;
    bool rg = t.needs_grad(a.id);
    int ai = a.id;
    int id = t.emit(t.val(a).array() + c, rg, rg ? Tape::BackFn([ai](Tape& t, int self) {
        t.grad_buf(ai) += t.grad_buf(self);
    }) : Tape::BackFn(nullptr));
    return {&t, id};
}

Var relu(Var a) {
    const Mat& v = a.tape->val(a);
    return unary_elementwise(a, v.cwiseMax(0.0),
                             [](const Mat& x) { return Mat((x.array() > 0.0).cast<double>()); });
}

Var leaky_relu(Var a, double negative_slope) {
    const Mat& v = a.tape->val(a);
    Mat out = v.unaryExpr([negative_slope](double x) { return x > 0.0 ? x : negative_slope * x; });
    return unary_elementwise(a, std::move(out), [negative_slope](const Mat& x) {
        return Mat(x.unaryExpr([negative_slope](double e) { return e > 0.0 ? 1.0 : negative_slope; }));
    });
}

Var hard_tanh(Var a) {
    const Mat& v = a.tape->val(a);
    Mat out = v.unaryExpr([](double w) { return std::clamp(2.0 * w, -1.0, 1.0); });
    return unary_elementwise(a, std::move(out), [](const Mat& x) {
        return Mat(x.unaryExpr([](double w) { return std::abs(w) < 0.5 ? 2.0 : 0.0; }));
    });
}

Var tanh(Var a) {
    const Mat& v = a.tape->val(a);
    return unary_elementwise(a, v.array().tanh(), [](const Mat& x) {
        return Mat(1.0 - x.array().tanh().square());
    });
}

Var atan(Var a) {
    const Mat& v = a.tape->val(a);
    return unary_elementwise(a, v.array().atan(), [](const Mat& x) {
        return Mat(1.0 / (1.0 + x.array().square()));
    });
}

Var sin(Var a) {
    const Mat& v = a.tape->val(a);
    return unary_elementwise(a, v.array().sin(), [](const Mat& x) { return Mat(x.array().cos()); });
}

Var cos(Var a) {
    const Mat& v = a.tape->val(a);
    return unary_elementwise(a, v.array().cos(), [](const Mat& x) { return Mat(-x.array().sin()); });
}

Var tan(Var a) {
    const Mat& v = a.tape->val(a);
    return unary_elementwise(a, v.array().tan(), [](const Mat& x) {
        return Mat(1.0 + x.array().tan().square());
    });
}

Var softmax(Var a) {
    Tape& t = *a.tape;
    const Mat& v = t.val(a);
    if (v.cols() != 1) throw std::invalid_argument("softmax: expects a column vector");
    Eigen::ArrayXd e = (v.col(0).array() - v.col(0).maxCoeff()).exp();
    Mat out = (e / e.sum()).matrix();
    bool rg = t.needs_grad(a.id);
    int ai = a.id;
    int id = t.emit(std::move(out), rg, rg ? Tape::BackFn([ai](Tape& t, int self) {
        const Mat& y = t.val_at(self);
        const Mat& g = t.grad_buf(self);
        double dot = y.col(0).dot(g.col(0));
        t.grad_buf(ai).col(0) += y.col(0).cwiseProduct(g.col(0).array().matrix() - Mat::Constant(y.rows(), 1, dot));
    }) : Tape::BackFn(nullptr));
    return {&t, id};
}

Var vcat(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("vcat: empty");
    Tape& t = *parts[0].tape;
    long rows = 0;
    bool rg = false;
    for (const Var& p : parts) {
        check_same_tape(parts[0], p, "vcat");
        if (t.val(p).cols() != 1) throw std::invalid_argument("vcat: expects column vectors");
        rows += t.val(p).rows();
        rg = rg || t.needs_grad(p.id);
    }
    Mat out(rows, 1);
    std::vector<std::pair<int, long>> spans;  // (parent id, start row)
    long r = 0;
    for (const Var& p : parts) {
        long n = t.val(p).rows();
        out.block(r, 0, n, 1) = t.val(p);
        spans.emplace_back(p.id, r);
        r += n;
    }
    int id = t.emit(std::move(out), rg, rg ? Tape::BackFn([spans](Tape& t, int self) {
        const Mat& g = t.grad_buf(self);
        for (auto [pid, start] : spans) {
            if (!t.needs_grad(pid)) continue;
            long n = t.val_at(pid).rows();
            t.grad_buf(pid) += g.block(start, 0, n, 1);
        }
    }) : Tape::BackFn(nullptr));
    return {&t, id};
}

Var flatten(Var a) {
    Tape& t = *a.tape;
    const Mat& v = t.val(a);
    Mat out(v.rows() * v.cols(), 1);
    for (long i = 0; i < v.rows(); ++i)
        for (long j = 0; j < v.cols(); ++j) out(i * v.cols() + j, 0) = v(i, j);
    bool rg = t.needs_grad(a.id);
    int ai = a.id;
    int id = t.emit(std::move(out), rg, rg ? Tape::BackFn([ai](Tape& t, int self) {
        const Mat& g = t.grad_buf(self);
        Mat& pg = t.grad_buf(ai);
        for (long i = 0; i < pg.rows(); ++i)
            for (long j = 0; j < pg.cols(); ++j) pg(i, j) += g(i * pg.cols() + j, 0);
    }) : Tape::BackFn(nullptr));
    return {&t, id};
}

Var block(Var a, int i, int j, int rows, int cols) {
    Tape& t = *a.tape;
    const Mat& v = t.val(a);
    if (i < 0 || j < 0 || i + rows > v.rows() || j + cols > v.cols())
        throw std::invalid_argument("block: out of range");
    bool rg = t.needs_grad(a.id);
    int ai = a.id;
    int id = t.emit(v.block(i, j, rows, cols), rg, rg ? Tape::BackFn([ai, i, j, rows, cols](Tape& t, int self) {
        t.grad_buf(ai).block(i, j, rows, cols) += t.grad_buf(self);
    }) : Tape::BackFn(nullptr));
    return {&t, id};
}

Var sum(Var a) {
    Tape& t = *a.tape;
    bool rg = t.needs_grad(a.id);
    int ai = a.id;
    int id = t.emit(Mat::Constant(1, 1, t.val(a).sum()), rg, rg ? Tape::BackFn([ai](Tape& t, int self) {
        t.grad_buf(ai).array() += t.grad_buf(self)(0, 0);
    }) : Tape::BackFn(nullptr));
    return {&t, id};
}

Var mean(Var a) {
    double n = static_cast<double>(a.tape->val(a).size());
    return scale(sum(a), 1.0 / n);
}

Var smooth_l1(Var a) {
    const Mat& v = a.tape->val(a);
    Mat out = v.unaryExpr([](double e) { return std::abs(e) < 1.0 ? 0.5 * e * e : std::abs(e) - 0.5; });
    return unary_elementwise(a, std::move(out), [](const Mat& x) {
        return Mat(x.unaryExpr([](double e) { return std::abs(e) < 1.0 ? e : (e > 0.0 ? 1.0 : -1.0); }));
    });
}

}  // namespace latlab::ad
