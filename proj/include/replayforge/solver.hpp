// The OWD predictor: an MLP regressor over standardized features.
//
// Hidden sizes (200, 150, 100, 50) with ReLU, a linear scalar output, MSE
// loss, Adam at lr 1e-3. Training mixes real and replayed batches as
// alpha * MSE(real) + (1 - alpha) * MSE(replay); with no replay present the
// loss degenerates to plain MSE on real data.
//
// Features reach the network as continuous values plus discrete one-hots,
// z-scored by a standardizer fitted on the first task and nudged by an
// exponential moving average (decay 0.99) on later tasks.
#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <string>
#include <vector>

#include "replayforge/common.hpp"
#include "replayforge/matrix.hpp"
#include "replayforge/nn.hpp"
#include "replayforge/serialize.hpp"
#include "replayforge/tabular.hpp"

namespace replayforge {

// Continuous columns verbatim, discrete columns one-hot.
inline std::size_t solver_input_width(const Schema& schema) {
    std::size_t w = 0;
    for (const auto& col : schema.columns)
        w += col.kind == ColumnKind::Continuous ? 1 : col.categories.size();
    return w;
}

inline Matrix solver_encode(const Schema& schema, const TabularDataset& ds) {
    if (!(ds.schema == schema))
        throw SchemaError("solver_encode: dataset schema mismatch");
    Matrix out(ds.n_rows(), solver_input_width(schema));
    for (std::size_t r = 0; r < ds.n_rows(); ++r) {
        double* dst = out.row_ptr(r);
        std::size_t off = 0;
        for (std::size_t c = 0; c < schema.columns.size(); ++c) {
            if (schema.columns[c].kind == ColumnKind::Continuous) {
                dst[off++] = ds.columns[c][r];
            } else {
                dst[off + static_cast<std::size_t>(ds.columns[c][r])] = 1.0;
                off += schema.columns[c].categories.size();
            }
        }
    }
    return out;
}

struct SolverConfig {
    std::vector<std::size_t> hidden_sizes = {200, 150, 100, 50};
    std::size_t epochs = 100;
    std::size_t batch_size = 256;
    double learning_rate = 1e-3;
    double standardizer_decay = 0.99;
};

// One real + one replay minibatch source with the mixing weight alpha.
struct WeightedBatches {
    Matrix real_x;
    std::vector<double> real_y;
    Matrix replay_x;
    std::vector<double> replay_y;
    double alpha = 0.5;

    bool has_replay() const { return replay_x.rows > 0; }
};

struct StepLoss {
    double real = 0.0;
    double replay = 0.0;
    double total = 0.0;
};

class Solver {
public:
    SolverConfig config;

    Solver() = default;
    explicit Solver(SolverConfig cfg) : config(std::move(cfg)) {}

    bool trained() const { return trained_; }
    const Mlp& network() const { return net_; }
    Mlp& network() { return net_; }

    // Standardizer: z-score fitted on the first observed task, EMA afterwards.
    void observe_features(const Matrix& x) {
        if (x.rows == 0) throw DomainError("observe_features: empty matrix");
        std::vector<double> mean(x.cols, 0.0), var(x.cols, 0.0);
        const double n = static_cast<double>(x.rows);
        for (std::size_t i = 0; i < x.rows; ++i) {
            const double* row = x.row_ptr(i);
            for (std::size_t j = 0; j < x.cols; ++j) mean[j] += row[j];
        }
        for (double& m : mean) m /= n;
        for (std::size_t i = 0; i < x.rows; ++i) {
            const double* row = x.row_ptr(i);
            for (std::size_t j = 0; j < x.cols; ++j) {
                const double d = row[j] - mean[j];
                var[j] += d * d;
            }
        }
        for (double& v : var) v /= n;
        if (!standardizer_set_) {
            mean_ = mean;
            std_.resize(x.cols);
            for (std::size_t j = 0; j < x.cols; ++j)
                std_[j] = std::max(std::sqrt(var[j]), 1e-8);
            standardizer_set_ = true;
        } else {
            const double d = config.standardizer_decay;
            for (std::size_t j = 0; j < x.cols; ++j) {
                mean_[j] = d * mean_[j] + (1.0 - d) * mean[j];
                std_[j] = std::max(
                    d * std_[j] + (1.0 - d) * std::sqrt(var[j]), 1e-8);
            }
        }
    }

    Matrix standardize(const Matrix& x) const {
        Matrix out = x;
        if (!standardizer_set_) return out;
        if (x.cols != mean_.size())
            throw DimensionError("standardize: feature width mismatch");
        for (std::size_t i = 0; i < out.rows; ++i) {
            double* row = out.row_ptr(i);
            for (std::size_t j = 0; j < out.cols; ++j)
                row[j] = (row[j] - mean_[j]) / std_[j];
        }
        return out;
    }

    std::vector<double> predict(const Matrix& features) const {
        if (net_.empty()) {
            // Never trained: the network would be all-zero output bias.
            return std::vector<double>(features.rows, 0.0);
        }
        if (features.cols != net_.in_dim())
            throw DimensionError("predict: feature width " +
                                 std::to_string(features.cols) + " != " +
                                 std::to_string(net_.in_dim()));
        Matrix out = net_.forward(standardize(features));
        return out.data;
    }

    // alpha * MSE(real) + (1 - alpha) * MSE(replay), Adam, shuffled batches.
    // Per-step losses are recorded in step_losses() for the loss-decomposition
    // checks; epoch_losses() records per-epoch averages of the total.
    void train_epochs(const WeightedBatches& data, std::size_t epochs, Rng& rng) {
        if (!(data.alpha >= 0.0 && data.alpha <= 1.0))
            throw DomainError("train_epochs: alpha must lie in [0, 1]");
        if (data.real_x.rows == 0)
            throw DomainError("train_epochs: no real data");
        if (data.real_x.rows != data.real_y.size() ||
            data.replay_x.rows != data.replay_y.size())
            throw DimensionError("train_epochs: feature/target count mismatch");

        // Independent derived streams keep the real-batch order identical
        // whether or not replay batches are present.
        const std::uint64_t init_seed = rng.next_u64();
        Rng real_order(mix_seed(rng.next_u64(), "solver-real-order"));
        Rng replay_order(mix_seed(rng.next_u64(), "solver-replay-order"));
        ensure_network(data, init_seed);
        Matrix real_std = standardize(data.real_x);
        Matrix replay_std =
            data.has_replay() ? standardize(data.replay_x) : Matrix{};

        AdamState opt;
        opt.learning_rate = config.learning_rate;
        std::vector<DenseGrads> grads(net_.layers.size());
        std::vector<DenseGrads> replay_grads(net_.layers.size());
        std::deque<std::string> names;
        std::vector<ParamBlock> blocks;

        step_losses_.clear();
        epoch_losses_.clear();
        const std::size_t n_real = real_std.rows;
        const std::size_t n_replay = replay_std.rows;
        const std::size_t bsz = std::min(config.batch_size, n_real);

        for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
            auto perm = real_order.permutation(n_real);
            std::vector<std::size_t> replay_perm;
            if (n_replay > 0) replay_perm = replay_order.permutation(n_replay);
            double epoch_sum = 0.0;
            std::size_t steps = 0;
            std::size_t replay_cursor = 0;
            for (std::size_t start = 0; start < n_real; start += bsz) {
                const std::size_t end = std::min(start + bsz, n_real);
                std::vector<std::size_t> idx(perm.begin() + start,
                                             perm.begin() + end);
                Matrix xb = take_rows(real_std, idx);
                Matrix yb(idx.size(), 1);
                for (std::size_t i = 0; i < idx.size(); ++i)
                    yb(i, 0) = data.real_y[idx[i]];

                StepLoss sl;
                MlpTrace trace = net_.forward_trace(xb);
                MseResult mse_real = mse_loss(trace.output, yb);
                sl.real = mse_real.loss;

                if (n_replay > 0) {
                    // Same nominal batch size, cycling through the replay pool.
                    std::vector<std::size_t> ridx(idx.size());
                    for (std::size_t i = 0; i < ridx.size(); ++i)
                        ridx[i] = replay_perm[(replay_cursor + i) % n_replay];
                    replay_cursor = (replay_cursor + ridx.size()) % n_replay;
                    Matrix rxb = take_rows(replay_std, ridx);
                    Matrix ryb(ridx.size(), 1);
                    for (std::size_t i = 0; i < ridx.size(); ++i)
                        ryb(i, 0) = data.replay_y[ridx[i]];

                    MlpTrace rtrace = net_.forward_trace(rxb);
                    MseResult mse_replay = mse_loss(rtrace.output, ryb);
                    sl.replay = mse_replay.loss;
                    sl.total = data.alpha * sl.real + (1.0 - data.alpha) * sl.replay;

                    for (double& g : mse_real.grad.data) g *= data.alpha;
                    for (double& g : mse_replay.grad.data) g *= 1.0 - data.alpha;
                    net_.backward(trace, mse_real.grad, grads);
                    net_.backward(rtrace, mse_replay.grad, replay_grads);
                    for (std::size_t li = 0; li < grads.size(); ++li) {
                        for (std::size_t i = 0; i < grads[li].grad_weights.size(); ++i)
                            grads[li].grad_weights.data[i] +=
                                replay_grads[li].grad_weights.data[i];
                        for (std::size_t i = 0; i < grads[li].grad_bias.size(); ++i)
                            grads[li].grad_bias[i] += replay_grads[li].grad_bias[i];
                    }
                } else {
                    sl.replay = 0.0;
                    sl.total = sl.real;
                    net_.backward(trace, mse_real.grad, grads);
                }

                if (blocks.empty())
                    blocks = mlp_param_blocks(net_, grads, names, "solver");
                adam_step(opt, blocks);
                step_losses_.push_back(sl);
                epoch_sum += sl.total;
                ++steps;
            }
            epoch_losses_.push_back(epoch_sum / static_cast<double>(steps));
        }
        trained_ = true;
    }

    const std::vector<StepLoss>& step_losses() const { return step_losses_; }
    const std::vector<double>& epoch_losses() const { return epoch_losses_; }

    std::string serialize() const {
        BinaryWriter w;
        w.str("RFSOL1");
        w.u64(config.hidden_sizes.size());
        for (auto h : config.hidden_sizes) w.u64(h);
        w.u64(config.epochs);
        w.u64(config.batch_size);
        w.f64(config.learning_rate);
        w.f64(config.standardizer_decay);
        w.u8(trained_ ? 1 : 0);
        w.u8(standardizer_set_ ? 1 : 0);
        w.f64s(mean_);
        w.f64s(std_);
        w.u64(net_.layers.size());
        for (const auto& layer : net_.layers) {
            w.u64(layer.weights.rows);
            w.u64(layer.weights.cols);
            w.u8(static_cast<std::uint8_t>(layer.activation));
            w.f64s(layer.weights.data);
            w.f64s(layer.bias);
        }
        return w.bytes();
    }

    static Solver deserialize(const std::string& bytes) {
        BinaryReader r(bytes);
        if (r.str() != "RFSOL1") throw ParseError("not a solver checkpoint");
        Solver s;
        s.config.hidden_sizes.resize(r.u64());
        for (auto& h : s.config.hidden_sizes) h = r.u64();
        s.config.epochs = r.u64();
        s.config.batch_size = r.u64();
        s.config.learning_rate = r.f64();
        s.config.standardizer_decay = r.f64();
        s.trained_ = r.u8() != 0;
        s.standardizer_set_ = r.u8() != 0;
        s.mean_ = r.f64s();
        s.std_ = r.f64s();
        s.net_.layers.resize(r.u64());
        for (auto& layer : s.net_.layers) {
            const std::size_t rows = r.u64();
            const std::size_t cols = r.u64();
            layer.activation = static_cast<Activation>(r.u8());
            layer.weights = Matrix(rows, cols);
            layer.weights.data = r.f64s();
            if (layer.weights.data.size() != rows * cols)
                throw ParseError("corrupt solver weights");
            layer.bias = r.f64s();
        }
        return s;
    }

private:
    // Builds the network on first training call; the output bias starts at
    // the mean of the first training targets.
    void ensure_network(const WeightedBatches& data, std::uint64_t seed) {
        if (!net_.empty()) {
            if (data.real_x.cols != net_.in_dim())
                throw DimensionError("train_epochs: feature width changed");
            return;
        }
        Rng init_rng(mix_seed(seed, "solver-init"));
        net_ = make_mlp(data.real_x.cols, config.hidden_sizes, 1,
                        Activation::ReLU, Activation::Identity, init_rng);
        double ymean = 0.0;
        for (double y : data.real_y) ymean += y;
        net_.layers.back().bias[0] = ymean / static_cast<double>(data.real_y.size());
    }

    Mlp net_;
    std::vector<double> mean_, std_;
    bool standardizer_set_ = false;
    bool trained_ = false;
    std::vector<StepLoss> step_losses_;
    std::vector<double> epoch_losses_;
};

}  // namespace replayforge
