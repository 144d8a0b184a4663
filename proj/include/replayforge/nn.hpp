// Dense layers with hand-derived gradients, MSE loss, and Adam.
//
// Gradients are exact analytic derivatives for the fixed architectures used
// here (no autodiff graph). The backward path can either recompute the
// pre-activation from the stored input or reuse one cached by the training
// loop.
#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "replayforge/common.hpp"
#include "replayforge/matrix.hpp"

namespace replayforge {

enum class Activation { ReLU, Identity, Tanh };

inline double apply_activation(Activation a, double z) {
    switch (a) {
        case Activation::ReLU: return z > 0.0 ? z : 0.0;
        case Activation::Tanh: return std::tanh(z);
        case Activation::Identity: return z;
    }
    return z;
}

// Derivative w.r.t. the pre-activation. ReLU'(0) is defined as 0.
inline double activation_grad(Activation a, double z) {
    switch (a) {
        case Activation::ReLU: return z > 0.0 ? 1.0 : 0.0;
        case Activation::Tanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Activation::Identity: return 1.0;
    }
    return 1.0;
}

struct DenseLayer {
    Matrix weights;             // in x out
    std::vector<double> bias;   // out
    Activation activation = Activation::Identity;

    std::size_t in_dim() const { return weights.rows; }
    std::size_t out_dim() const { return weights.cols; }
};

// Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero bias.
inline DenseLayer make_dense(std::size_t in, std::size_t out, Activation act,
                             Rng& rng) {
    DenseLayer layer;
    layer.weights = Matrix(in, out);
    layer.bias.assign(out, 0.0);
    layer.activation = act;
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (double& w : layer.weights.data) w = rng.uniform(-limit, limit);
    return layer;
}

// Pre-activation Z = X*W + b.
inline Matrix dense_preactivation(const DenseLayer& layer, const Matrix& input) {
    if (input.cols != layer.in_dim())
        throw DimensionError("dense_forward: input width " +
                             std::to_string(input.cols) + " != layer in_dim " +
                             std::to_string(layer.in_dim()));
    Matrix z = matmul(input, layer.weights);
    add_row_inplace(z, layer.bias);
    return z;
}

inline Matrix dense_forward(const DenseLayer& layer, const Matrix& input) {
    Matrix z = dense_preactivation(layer, input);
    for (double& v : z.data) v = apply_activation(layer.activation, v);
    return z;
}

struct DenseGrads {
    Matrix grad_weights;
    std::vector<double> grad_bias;
    Matrix grad_input;
};

// Backward with a caller-supplied pre-activation (training loops cache it).
inline DenseGrads dense_backward_with_preact(const DenseLayer& layer,
                                             const Matrix& input,
                                             const Matrix& preact,
                                             const Matrix& upstream) {
    require_shape(upstream, input.rows, layer.out_dim(), "dense_backward upstream");
    require_shape(preact, input.rows, layer.out_dim(), "dense_backward preact");
    Matrix dz = upstream;
    for (std::size_t i = 0; i < dz.size(); ++i)
        dz.data[i] *= activation_grad(layer.activation, preact.data[i]);
    DenseGrads g;
    g.grad_weights = matmul_tn(input, dz);
    g.grad_bias = column_sums(dz);
    g.grad_input = matmul_nt(dz, layer.weights);
    return g;
}

inline DenseGrads dense_backward(const DenseLayer& layer, const Matrix& input,
                                 const Matrix& upstream) {
    return dense_backward_with_preact(layer, input,
                                      dense_preactivation(layer, input), upstream);
}

// In-place product variants. They keep the destination's allocation stable
// after the first call, which lets optimizer blocks hold raw pointers into
// the gradient buffers across steps.
inline void matmul_tn_into(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.rows != b.rows) throw DimensionError("matmul_tn_into: row counts differ");
    if (c.rows != a.cols || c.cols != b.cols) c = Matrix(a.cols, b.cols);
    std::fill(c.data.begin(), c.data.end(), 0.0);
    for (std::size_t s = 0; s < a.rows; ++s) {
        const double* arow = a.row_ptr(s);
        const double* brow = b.row_ptr(s);
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double asi = arow[i];
            double* crow = c.row_ptr(i);
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += asi * brow[j];
        }
    }
}

inline void column_sums_into(const Matrix& m, std::vector<double>& out) {
    if (out.size() != m.cols) out.assign(m.cols, 0.0);
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* row = m.row_ptr(i);
        for (std::size_t j = 0; j < m.cols; ++j) out[j] += row[j];
    }
}

// ---- MSE --------------------------------------------------------------------

struct MseResult {
    double loss = 0.0;
    Matrix grad;  // d loss / d pred
};

inline MseResult mse_loss(const Matrix& pred, const Matrix& target) {
    if (pred.rows != target.rows || pred.cols != target.cols)
        throw DimensionError("mse_loss: shape mismatch");
    if (pred.empty()) throw DomainError("mse_loss: empty input");
    MseResult r;
    r.grad = Matrix(pred.rows, pred.cols);
    const double n = static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.data[i] - target.data[i];
        r.loss += d * d;
        r.grad.data[i] = 2.0 * d / n;
    }
    r.loss /= n;
    if (!std::isfinite(r.loss)) throw TrainingError("mse_loss: non-finite loss");
    return r;
}

// ---- Adam -------------------------------------------------------------------

struct ParamBlock {
    double* params = nullptr;
    const double* grads = nullptr;
    std::size_t size = 0;
    const char* name = "";
};

struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long long step_count = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
};

// One Adam update with bias correction over all parameter blocks. Moments are
// allocated on first use; block sizes must stay stable afterwards. Any
// non-finite gradient or parameter aborts with the offending block's name.
inline void adam_step(AdamState& state, std::span<const ParamBlock> blocks) {
    if (state.first_moment.empty()) {
        state.first_moment.resize(blocks.size());
        state.second_moment.resize(blocks.size());
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            state.first_moment[b].assign(blocks[b].size, 0.0);
            state.second_moment[b].assign(blocks[b].size, 0.0);
        }
    }
    if (state.first_moment.size() != blocks.size())
        throw DimensionError("adam_step: block count changed");
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const ParamBlock& blk = blocks[b];
        if (state.first_moment[b].size() != blk.size)
            throw DimensionError("adam_step: block size changed for " +
                                 std::string(blk.name));
        double* m = state.first_moment[b].data();
        double* v = state.second_moment[b].data();
        for (std::size_t i = 0; i < blk.size; ++i) {
            const double g = blk.grads[i];
            if (!std::isfinite(g))
                throw TrainingError("adam_step: non-finite gradient in " +
                                    std::string(blk.name));
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            blk.params[i] -=
                state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
            if (!std::isfinite(blk.params[i]))
                throw TrainingError("adam_step: non-finite parameter in " +
                                    std::string(blk.name));
        }
    }
}

// ---- Layer stack ------------------------------------------------------------

struct MlpTrace {
    std::vector<Matrix> inputs;   // input to each layer
    std::vector<Matrix> preacts;  // Z of each layer
    Matrix output;
};

struct Mlp {
    std::vector<DenseLayer> layers;

    bool empty() const { return layers.empty(); }
    std::size_t in_dim() const { return layers.front().in_dim(); }
    std::size_t out_dim() const { return layers.back().out_dim(); }

    Matrix forward(const Matrix& x) const {
        Matrix h = x;
        for (const auto& layer : layers) h = dense_forward(layer, h);
        return h;
    }

    MlpTrace forward_trace(const Matrix& x) const {
        MlpTrace t;
        t.inputs.reserve(layers.size());
        t.preacts.reserve(layers.size());
        Matrix h = x;
        for (const auto& layer : layers) {
            t.inputs.push_back(h);
            Matrix z = dense_preactivation(layer, h);
            t.preacts.push_back(z);
            for (double& v : z.data) v = apply_activation(layer.activation, v);
            h = std::move(z);
        }
        t.output = std::move(h);
        return t;
    }

    // Writes per-layer grads into `grads` (buffers are reused across calls so
    // optimizer blocks can point at them) and returns the gradient w.r.t. the
    // stack input. grad_input fields are left empty on this path.
    Matrix backward(const MlpTrace& trace, const Matrix& upstream,
                    std::vector<DenseGrads>& grads) const {
        if (grads.size() != layers.size()) grads.resize(layers.size());
        Matrix up = upstream;
        for (std::size_t li = layers.size(); li-- > 0;) {
            const DenseLayer& layer = layers[li];
            require_shape(up, trace.inputs[li].rows, layer.out_dim(),
                          "mlp backward upstream");
            for (std::size_t i = 0; i < up.size(); ++i)
                up.data[i] *=
                    activation_grad(layer.activation, trace.preacts[li].data[i]);
            matmul_tn_into(trace.inputs[li], up, grads[li].grad_weights);
            column_sums_into(up, grads[li].grad_bias);
            up = matmul_nt(up, layer.weights);
        }
        return up;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& layer : layers) n += layer.weights.size() + layer.bias.size();
        return n;
    }
};

inline Mlp make_mlp(std::size_t in, const std::vector<std::size_t>& hidden,
                    std::size_t out, Activation hidden_act, Activation out_act,
                    Rng& rng) {
    Mlp net;
    std::size_t prev = in;
    for (std::size_t h : hidden) {
        net.layers.push_back(make_dense(prev, h, hidden_act, rng));
        prev = h;
    }
    net.layers.push_back(make_dense(prev, out, out_act, rng));
    return net;
}

// Adam blocks for an MLP whose gradients live in `grads` (same layout).
// `names` owns the block-name storage; a deque keeps the pointers stable.
inline std::vector<ParamBlock> mlp_param_blocks(Mlp& net,
                                                std::vector<DenseGrads>& grads,
                                                std::deque<std::string>& names,
                                                const std::string& prefix) {
    std::vector<ParamBlock> blocks;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        names.push_back(prefix + ".layer" + std::to_string(i) + ".weights");
        blocks.push_back({net.layers[i].weights.data.data(),
                          grads[i].grad_weights.data.data(),
                          net.layers[i].weights.size(), names.back().c_str()});
        names.push_back(prefix + ".layer" + std::to_string(i) + ".bias");
        blocks.push_back({net.layers[i].bias.data(), grads[i].grad_bias.data(),
                          net.layers[i].bias.size(), names.back().c_str()});
    }
    return blocks;
}

}  // namespace replayforge
