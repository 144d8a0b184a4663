// Evaluation protocol: result matrix, MAPE/AveMAPE/F/F_k, tail metrics,
// storage accounting, and the method runner (Naive, Cumulative,
// SingleGen-VAE, SingleGen-TVAE, MultiGen-TVAE).
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "replayforge/common.hpp"
#include "replayforge/replay.hpp"
#include "replayforge/scenario.hpp"
#include "replayforge/solver.hpp"
#include "replayforge/tabular.hpp"

namespace replayforge {

// ---- Result matrix -------------------------------------------------------------

// R[i][j] = test MAPE (percent) on task j after training through task i.
// Unpopulated cells are NaN.
struct ResultMatrix {
    std::size_t tasks = 0;
    std::vector<double> entries;

    ResultMatrix() = default;
    explicit ResultMatrix(std::size_t n)
        : tasks(n),
          entries(n * n, std::numeric_limits<double>::quiet_NaN()) {}

    double& at(std::size_t i, std::size_t j) { return entries[i * tasks + j]; }
    double at(std::size_t i, std::size_t j) const { return entries[i * tasks + j]; }
    bool populated(std::size_t i, std::size_t j) const {
        return !std::isnan(at(i, j));
    }
    bool fully_populated() const {
        for (double v : entries)
            if (std::isnan(v)) return false;
        return true;
    }
};

// ---- Metrics --------------------------------------------------------------------

// (100/N) * sum |y - yhat| / |y|
inline double mape(const std::vector<double>& y, const std::vector<double>& yhat) {
    if (y.empty() || y.size() != yhat.size())
        throw DimensionError("mape: need equal non-empty vectors");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (std::abs(y[i]) <= 1e-9)
            throw DomainError("mape: ground truth too close to zero");
        acc += std::abs(y[i] - yhat[i]) / std::abs(y[i]);
    }
    return 100.0 * acc / static_cast<double>(y.size());
}

// (1/I) * sum_i R[I][i]
inline double ave_mape(const ResultMatrix& r) {
    if (r.tasks == 0) throw StateError("ave_mape: empty matrix");
    double acc = 0.0;
    for (std::size_t j = 0; j < r.tasks; ++j) {
        if (!r.populated(r.tasks - 1, j))
            throw StateError("ave_mape: final row not fully populated");
        acc += r.at(r.tasks - 1, j);
    }
    return acc / static_cast<double>(r.tasks);
}

// (1/(I-1)) * sum_{i<I} (R[I][i] - R[i][i]); positive means forgetting.
inline double forgetting(const ResultMatrix& r) {
    if (r.tasks < 2) throw DomainError("forgetting: needs at least 2 tasks");
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < r.tasks; ++i) {
        if (!r.populated(r.tasks - 1, i) || !r.populated(i, i))
            throw StateError("forgetting: required cells not populated");
        acc += r.at(r.tasks - 1, i) - r.at(i, i);
    }
    return acc / static_cast<double>(r.tasks - 1);
}

// (1/(I-k)) * sum_{i<=I-k} (R[i+k][i] - R[i][i])
inline double f_k(const ResultMatrix& r, std::size_t k) {
    if (r.tasks < 2 || k < 1 || k > r.tasks - 1)
        throw DomainError("f_k: k must lie in [1, I-1]");
    double acc = 0.0;
    for (std::size_t i = 0; i + k < r.tasks; ++i) {
        if (!r.populated(i + k, i) || !r.populated(i, i))
            throw StateError("f_k: required cells not populated");
        acc += r.at(i + k, i) - r.at(i, i);
    }
    return acc / static_cast<double>(r.tasks - k);
}

// Nearest-rank percentile of a copy of `values`.
inline double percentile(std::vector<double> values, double pct) {
    if (values.empty()) throw DomainError("percentile: empty sample");
    if (!(pct > 0.0 && pct < 100.0))
        throw DomainError("percentile: pct must lie in (0, 100)");
    std::sort(values.begin(), values.end());
    const auto rank = static_cast<std::size_t>(
        std::ceil(pct / 100.0 * static_cast<double>(values.size())));
    return values[std::max<std::size_t>(rank, 1) - 1];
}

// ---- Tail evaluation -------------------------------------------------------------

// Same pipeline as the full metrics, restricted to test samples whose ground
// truth exceeds the threshold. Cells with fewer than min_count tail samples
// are marked missing rather than fabricated; the summary covers available
// cells and reports coverage.
struct TailSummary {
    double threshold = 0.0;
    std::size_t min_count = 30;
    ResultMatrix matrix;  // NaN where missing
    double coverage = 0.0;  // fraction of I*I cells available
    std::optional<double> ave_mape;    // over available final-row cells
    std::optional<double> forgetting;  // over i with both cells available
};

// Indices of test samples above the threshold, per task.
inline std::vector<std::vector<std::size_t>> tail_indices(
    const std::vector<std::vector<double>>& test_targets, double threshold) {
    std::vector<std::vector<std::size_t>> idx(test_targets.size());
    for (std::size_t j = 0; j < test_targets.size(); ++j)
        for (std::size_t s = 0; s < test_targets[j].size(); ++s)
            if (test_targets[j][s] > threshold) idx[j].push_back(s);
    return idx;
}

inline double subset_mape(const std::vector<double>& y,
                          const std::vector<double>& yhat,
                          const std::vector<std::size_t>& idx) {
    std::vector<double> ys, yhats;
    ys.reserve(idx.size());
    yhats.reserve(idx.size());
    for (std::size_t s : idx) {
        ys.push_back(y[s]);
        yhats.push_back(yhat[s]);
    }
    return mape(ys, yhats);
}

// Coverage and summary metrics from a (possibly sparse) tail matrix.
inline void finalize_tail_summary(TailSummary& tail) {
    const std::size_t n = tail.matrix.tasks;
    std::size_t available = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (tail.matrix.populated(i, j)) ++available;
    tail.coverage = n == 0 ? 0.0
                           : static_cast<double>(available) /
                                 static_cast<double>(n * n);
    tail.ave_mape.reset();
    tail.forgetting.reset();
    double acc = 0.0;
    std::size_t cnt = 0;
    for (std::size_t j = 0; j < n; ++j) {
        if (!tail.matrix.populated(n - 1, j)) continue;
        acc += tail.matrix.at(n - 1, j);
        ++cnt;
    }
    if (cnt > 0) tail.ave_mape = acc / static_cast<double>(cnt);
    acc = 0.0;
    cnt = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (!tail.matrix.populated(n - 1, i) || !tail.matrix.populated(i, i))
            continue;
        acc += tail.matrix.at(n - 1, i) - tail.matrix.at(i, i);
        ++cnt;
    }
    if (cnt > 0) tail.forgetting = acc / static_cast<double>(cnt);
}

// Per-cell predictions: preds[i][j] aligns with test_targets[j].
using CellPredictions = std::vector<std::vector<std::vector<double>>>;

inline ResultMatrix build_result_matrix(
    const std::vector<std::vector<double>>& test_targets,
    const CellPredictions& preds) {
    const std::size_t n = test_targets.size();
    ResultMatrix r(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            r.at(i, j) = mape(test_targets[j], preds[i][j]);
    return r;
}

inline TailSummary build_tail_summary(
    const std::vector<std::vector<double>>& test_targets,
    const CellPredictions& preds, double threshold, std::size_t min_count) {
    const std::size_t n = test_targets.size();
    TailSummary tail;
    tail.threshold = threshold;
    tail.min_count = min_count;
    tail.matrix = ResultMatrix(n);
    const auto idx = tail_indices(test_targets, threshold);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (idx[j].size() >= min_count)
                tail.matrix.at(i, j) =
                    subset_mape(test_targets[j], preds[i][j], idx[j]);
    finalize_tail_summary(tail);
    return tail;
}

// ---- Methods ----------------------------------------------------------------------

enum class Method { Naive, Cumulative, SingleGenVAE, SingleGenTVAE, MultiGenTVAE };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::Naive: return "naive";
        case Method::Cumulative: return "cumulative";
        case Method::SingleGenVAE: return "singlegen-vae";
        case Method::SingleGenTVAE: return "singlegen-tvae";
        case Method::MultiGenTVAE: return "multigen-tvae";
    }
    return "?";
}

inline Method method_from_name(const std::string& name) {
    for (Method m : {Method::Naive, Method::Cumulative, Method::SingleGenVAE,
                     Method::SingleGenTVAE, Method::MultiGenTVAE})
        if (name == method_name(m)) return m;
    throw UsageError("unknown method '" + name +
                     "' (valid: naive, cumulative, singlegen-vae, "
                     "singlegen-tvae, multigen-tvae)");
}

struct HyperParams {
    double alpha = 0.5;
    std::size_t solver_epochs = 100;
    std::size_t gen_epochs = 300;
    std::size_t batch_size = 256;
    double solver_lr = 1e-3;
    double gen_lr = 1e-3;
    std::size_t latent_dim = 32;
    std::vector<std::size_t> gen_hidden = {128, 128};
    std::vector<std::size_t> solver_hidden = {200, 150, 100, 50};
    std::size_t max_modes = kDefaultMaxModes;
    double train_fraction = 0.7;
    double tail_percentile = 90.0;
    std::size_t min_tail_count = 30;
    bool warm_start = false;
};

struct MethodRunSummary {
    double ave_mape = 0.0;
    double forgetting = 0.0;
    std::vector<double> f_k;  // index k-1 holds F_k, k = 1..I-1
};

struct MethodRun {
    Method method = Method::Naive;
    SequenceSpec sequence;
    std::uint64_t train_seed = 0;
    HyperParams hyperparams;
    ResultMatrix result;
    MethodRunSummary summary;
    TailSummary tail;
    std::vector<std::size_t> storage_bytes;  // retained-state bytes after each task
    double wall_time_seconds = 0.0;
};

inline MethodRunSummary summarize(const ResultMatrix& r) {
    MethodRunSummary s;
    s.ave_mape = ave_mape(r);
    s.forgetting = forgetting(r);
    for (std::size_t k = 1; k < r.tasks; ++k) s.f_k.push_back(f_k(r, k));
    return s;
}

namespace detail {

inline SolverConfig solver_config_from(const HyperParams& hp) {
    SolverConfig cfg;
    cfg.hidden_sizes = hp.solver_hidden;
    cfg.epochs = hp.solver_epochs;
    cfg.batch_size = hp.batch_size;
    cfg.learning_rate = hp.solver_lr;
    return cfg;
}

inline GeneratorConfig generator_config_from(const HyperParams& hp,
                                             GeneratorKind kind) {
    GeneratorConfig cfg;
    cfg.kind = kind;
    cfg.latent_dim = hp.latent_dim;
    cfg.hidden_sizes = hp.gen_hidden;
    cfg.epochs = hp.gen_epochs;
    cfg.batch_size = hp.batch_size;
    cfg.learning_rate = hp.gen_lr;
    cfg.max_modes = hp.max_modes;
    cfg.warm_start = hp.warm_start;
    return cfg;
}

}  // namespace detail

// Scholar preset for the generative methods: K = 1 with an all-ones b for the
// single-generator baselines, K = J with one-hot b_k per UE type for the
// multi-generator method.
inline Scholar make_scholar(Method method, const Schema& schema, std::size_t J,
                            const HyperParams& hp, Rng& rng) {
    Scholar scholar;
    scholar.alpha = hp.alpha;
    scholar.solver = Solver(detail::solver_config_from(hp));
    scholar.solver_epochs = hp.solver_epochs;
    const GeneratorKind kind =
        method == Method::SingleGenVAE ? GeneratorKind::VAE : GeneratorKind::TVAE;
    const std::size_t K = method == Method::MultiGenTVAE ? J : 1;
    for (std::size_t k = 0; k < K; ++k) {
        Rng init(mix_seed(rng.next_u64(), "scholar-generator", k));
        scholar.generators.emplace_back(detail::generator_config_from(hp, kind),
                                        schema, init);
        ConfigVector b;
        b.role = ConfigRole::Generator;
        if (method == Method::MultiGenTVAE) {
            b.entries.assign(J, 0.0);
            b.entries[k] = 1.0;
        } else {
            b.entries.assign(J, 1.0);  // single generator serves every UE
        }
        scholar.configs.push_back(b);
    }
    return scholar;
}

// Per-task checkpoint hook and resume state for run_method.
struct RunHooks {
    // Called after each completed task (0-based index); the run's result and
    // tail matrices are populated through row `i` at call time.
    std::function<void(std::size_t, const MethodRun&, const Scholar*,
                       const Solver*)>
        after_task;
    std::size_t start_task = 0;
    const Scholar* resume_scholar = nullptr;
    const Solver* resume_solver = nullptr;
    const ResultMatrix* resume_result = nullptr;
    const ResultMatrix* resume_tail_matrix = nullptr;
    const std::vector<std::size_t>* resume_storage = nullptr;
};

// Runs one method over one task sequence. Training randomness derives from
// `train_seed` via per-task labels (so a resumed run continues bit-exactly);
// task data and splits derive from sequence.seed so every method and seed
// sees identical task datasets for a given sequence.
inline MethodRun run_method(Method method, const SequenceSpec& spec,
                            const HyperParams& hp, std::uint64_t train_seed,
                            const RunHooks* hooks = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    auto tasks = build_sequence(spec);
    const std::size_t I = tasks.size();
    const Schema schema = tasks.front().dataset.schema;
    const std::size_t J = tasks.front().config_vector.size();

    std::vector<TabularDataset> train(I), test(I);
    for (std::size_t i = 0; i < I; ++i) {
        Rng split_rng(mix_seed(spec.seed, "split", i));
        auto split =
            split_train_test(tasks[i].dataset, hp.train_fraction, split_rng);
        train[i] = std::move(split.train);
        test[i] = std::move(split.test);
        tasks[i].dataset = TabularDataset(schema);  // free the full copy
    }

    std::vector<std::vector<double>> test_targets(I);
    std::vector<Matrix> test_features(I);
    std::vector<double> pooled;
    for (std::size_t j = 0; j < I; ++j) {
        test_targets[j] = test[j].targets;
        test_features[j] = solver_encode(schema, test[j]);
        pooled.insert(pooled.end(), test[j].targets.begin(),
                      test[j].targets.end());
    }
    const double tail_threshold = percentile(pooled, hp.tail_percentile);
    const auto tail_idx = tail_indices(test_targets, tail_threshold);

    MethodRun run;
    run.method = method;
    run.sequence = spec;
    run.train_seed = train_seed;
    run.hyperparams = hp;
    run.result = ResultMatrix(I);
    run.tail.threshold = tail_threshold;
    run.tail.min_count = hp.min_tail_count;
    run.tail.matrix = ResultMatrix(I);
    run.storage_bytes.assign(I, 0);

    // Method state.
    Scholar scholar;
    Solver plain_solver(detail::solver_config_from(hp));
    const bool generative = method == Method::SingleGenVAE ||
                            method == Method::SingleGenTVAE ||
                            method == Method::MultiGenTVAE;
    Rng setup_rng(mix_seed(train_seed, "setup"));
    if (generative) scholar = make_scholar(method, schema, J, hp, setup_rng);

    std::size_t start_task = 0;
    std::size_t cumulative_retained = 0;
    if (hooks && hooks->start_task > 0) {
        start_task = hooks->start_task;
        if (hooks->resume_scholar) scholar = *hooks->resume_scholar;
        if (hooks->resume_solver) plain_solver = *hooks->resume_solver;
        if (hooks->resume_result) run.result = *hooks->resume_result;
        if (hooks->resume_tail_matrix) run.tail.matrix = *hooks->resume_tail_matrix;
        if (hooks->resume_storage) run.storage_bytes = *hooks->resume_storage;
        for (std::size_t i = 0; i < start_task; ++i)
            cumulative_retained += train[i].raw_bytes();
    }

    for (std::size_t i = start_task; i < I; ++i) {
        Rng task_rng(mix_seed(train_seed, "task", i));
        switch (method) {
            case Method::Naive: {
                WeightedBatches batches;
                batches.alpha = 1.0;
                batches.real_x = solver_encode(schema, train[i]);
                batches.real_y = train[i].targets;
                plain_solver.observe_features(batches.real_x);
                plain_solver.train_epochs(batches, hp.solver_epochs, task_rng);
                break;
            }
            case Method::Cumulative: {
                // Retrain from scratch on the union of all training sets so far.
                TabularDataset all = train[0];
                for (std::size_t j = 1; j <= i; ++j) all.append_dataset(train[j]);
                plain_solver = Solver(detail::solver_config_from(hp));
                WeightedBatches batches;
                batches.alpha = 1.0;
                batches.real_x = solver_encode(schema, all);
                batches.real_y = all.targets;
                plain_solver.observe_features(batches.real_x);
                plain_solver.train_epochs(batches, hp.solver_epochs, task_rng);
                cumulative_retained += train[i].raw_bytes();
                break;
            }
            default:
                scholar.learn_task(train[i], tasks[i].config_vector, task_rng);
                break;
        }

        const Solver& active = generative ? scholar.solver : plain_solver;
        for (std::size_t j = 0; j < I; ++j) {
            const auto yhat = active.predict(test_features[j]);
            run.result.at(i, j) = mape(test_targets[j], yhat);
            if (tail_idx[j].size() >= hp.min_tail_count)
                run.tail.matrix.at(i, j) =
                    subset_mape(test_targets[j], yhat, tail_idx[j]);
        }
        run.storage_bytes[i] =
            method == Method::Cumulative
                ? cumulative_retained
                : (generative ? scholar.generators_serialized_bytes() : 0);
        if (hooks && hooks->after_task)
            hooks->after_task(i, run, generative ? &scholar : nullptr,
                              generative ? nullptr : &plain_solver);
    }

    run.summary = summarize(run.result);
    finalize_tail_summary(run.tail);
    run.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return run;
}

}  // namespace replayforge
