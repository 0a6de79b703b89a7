#include "latlab/nn.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace latlab::ad {

Mat glorot(int rows, int cols, Rng& rng) {
    double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Mat m(rows, cols);
    for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j) m(i, j) = rng.uniform(-limit, limit);
    return m;
}

Mlp::Mlp(std::vector<int> widths, Rng& rng, double head_scale, double head_bias)
    : widths_(std::move(widths)) {
    if (widths_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output widths");
    for (std::size_t l = 1; l < widths_.size(); ++l) {
        bool final_layer = (l + 1 == widths_.size());
        Mat w = glorot(widths_[l], widths_[l - 1], rng);
        if (final_layer) w *= head_scale;
        weights_.emplace_back(std::move(w));
        biases_.emplace_back(final_layer ? Mat::Constant(widths_[l], 1, head_bias)
                                         : Mat::Zero(widths_[l], 1));
    }
}

Var Mlp::forward(Tape& t, Var z0, bool trainable) const {
    const Mat& in = t.val(z0);
    if (in.rows() != widths_.front() || in.cols() != 1)
        throw std::invalid_argument("Mlp::forward: input dim " + std::to_string(in.rows()) +
                                    " != " + std::to_string(widths_.front()));
    Var z = z0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        Var w = lift(t, weights_[l], trainable);
        Var b = lift(t, biases_[l], trainable);
        z = matmul(w, z) + b;
        if (l + 1 < weights_.size()) z = relu(z);
    }
    return z;
}

std::vector<Parameter*> Mlp::params() {
    std::vector<Parameter*> out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        out.push_back(&weights_[l]);
        out.push_back(&biases_[l]);
    }
    return out;
}

std::size_t Mlp::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 1; l < widths_.size(); ++l)
        n += static_cast<std::size_t>(widths_[l]) * widths_[l - 1] + widths_[l];
    return n;
}

void Adam::attach(std::vector<Parameter*> params) {
    params_ = std::move(params);
    m_.clear();
    v_.clear();
    for (Parameter* p : params_) {
        m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    }
    t_ = 0;
}

void Adam::step() {
    for (Parameter* p : params_) {
        if (!p->grad.allFinite()) {
            ++skipped_;
            for (Parameter* q : params_) q->zero_grad();
            return;
        }
    }
    if (cfg_.clip_norm > 0.0) {
        double sq = 0.0;
        for (Parameter* p : params_) sq += p->grad.squaredNorm();
        double norm = std::sqrt(sq);
        if (norm > cfg_.clip_norm) {
            double s = cfg_.clip_norm / norm;
            for (Parameter* p : params_) p->grad *= s;
        }
    }
    ++t_;
    if (cfg_.plain_sgd) {
        for (Parameter* p : params_) {
            p->value -= cfg_.lr * p->grad;
            p->zero_grad();
        }
        return;
    }
    double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const Mat& g = params_[i]->grad;
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
        Mat mhat = m_[i] / c1;
        Mat vhat = v_[i] / c2;
        params_[i]->value.array() -= cfg_.lr * mhat.array() / (vhat.array().sqrt() + cfg_.eps);
        params_[i]->zero_grad();
    }
}

namespace {
constexpr char kMagic[8] = {'L', 'A', 'T', 'C', 'K', 'P', 'T', '1'};
}

void save_params(std::ostream& os, const std::vector<Parameter*>& params) {
    os.write(kMagic, 8);
    std::uint32_t n = static_cast<std::uint32_t>(params.size());
    os.write(reinterpret_cast<const char*>(&n), 4);
    for (const Parameter* p : params) {
        std::uint32_t r = static_cast<std::uint32_t>(p->value.rows());
        std::uint32_t c = static_cast<std::uint32_t>(p->value.cols());
        os.write(reinterpret_cast<const char*>(&r), 4);
        os.write(reinterpret_cast<const char*>(&c), 4);
        for (std::uint32_t i = 0; i < r; ++i)
            for (std::uint32_t j = 0; j < c; ++j) {
                double x = p->value(i, j);
                os.write(reinterpret_cast<const char*>(&x), 8);
            }
    }
}

void load_params(std::istream& is, const std::vector<Parameter*>& params) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("checkpoint: bad magic");
    std::uint32_t n = 0;
    is.read(reinterpret_cast<char*>(&n), 4);
    if (n != params.size())
        throw std::runtime_error("checkpoint: tensor count " + std::to_string(n) + " != expected " +
                                 std::to_string(params.size()));
    for (Parameter* p : params) {
        std::uint32_t r = 0, c = 0;
        is.read(reinterpret_cast<char*>(&r), 4);
        is.read(reinterpret_cast<char*>(&c), 4);
        if (r != p->value.rows() || c != p->value.cols())
            throw std::runtime_error("checkpoint: shape " + std::to_string(r) + "x" + std::to_string(c) +
                                     " != expected " + std::to_string(p->value.rows()) + "x" +
                                     std::to_string(p->value.cols()));
        for (std::uint32_t i = 0; i < r; ++i)
            for (std::uint32_t j = 0; j < c; ++j) {
                double x;
                is.read(reinterpret_cast<char*>(&x), 8);
                p->value(i, j) = x;
            }
        p->zero_grad();
    }
    if (!is) throw std::runtime_error("checkpoint: truncated");
}

void save_params_file(const std::string& path, const std::vector<Parameter*>& params) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path + " for write");
    save_params(f, params);
}

void load_params_file(const std::string& path, const std::vector<Parameter*>& params) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    load_params(f, params);
}

}  // namespace latlab::ad
