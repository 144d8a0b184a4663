// The scholar: multi-generator generative replay.
//
// Learning one task runs three steps:
//   1. solver update  — real batches (weight alpha) against replay batches
//      sampled from every trained generator's prior state and labeled by the
//      prior solver snapshot (weight 1 - alpha);
//   2. target selection — argmax of the relevance scores b_k . a, ties to the
//      lowest index;
//   3. target generator update — the selected generator refits on current
//      real features concatenated with samples from its own prior state.
// All other generators are untouched.
//
// Every stage draws its seed from the task Rng in a fixed documented order
// (replay, solver, generator-replay, generator-fit), so stages can be
// replayed independently and a checkpointed run resumes bit-exactly.
#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "replayforge/common.hpp"
#include "replayforge/generators.hpp"
#include "replayforge/matrix.hpp"
#include "replayforge/solver.hpp"
#include "replayforge/tabular.hpp"

#include "json.hpp"

namespace replayforge {

// ---- Configuration vectors ----------------------------------------------------

enum class ConfigRole { Task, Generator };

struct ConfigVector {
    std::vector<double> entries;
    ConfigRole role = ConfigRole::Task;

    std::size_t size() const { return entries.size(); }

    void validate() const {
        for (double v : entries) {
            if (role == ConfigRole::Task) {
                if (v != 0.0 && v != 1.0)
                    throw DomainError("task configuration vector must be binary");
            } else if (!(v >= 0.0 && v <= 1.0)) {
                throw DomainError(
                    "generator configuration entries must lie in [0, 1]");
            }
        }
    }
};

struct RelevanceVector {
    std::vector<double> scores;
};

// r_k = b_k . a
inline RelevanceVector relevance(const ConfigVector& a,
                                 const std::vector<ConfigVector>& bs) {
    a.validate();
    RelevanceVector r;
    r.scores.reserve(bs.size());
    for (const auto& b : bs) {
        if (b.size() != a.size())
            throw DimensionError("relevance: configuration length mismatch");
        double dot = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j)
            dot += b.entries[j] * a.entries[j];
        r.scores.push_back(dot);
    }
    return r;
}

struct Selection {
    std::size_t index = 0;   // 0-based generator index
    bool no_relevant = false;  // all scores were zero
};

// Argmax with ties broken by lowest index. An all-zero relevance vector
// selects generator 0 and flags the degenerate case.
inline Selection select_target(const RelevanceVector& r) {
    if (r.scores.empty()) throw DomainError("select_target: no generators");
    Selection s;
    for (std::size_t k = 1; k < r.scores.size(); ++k)
        if (r.scores[k] > r.scores[s.index]) s.index = k;
    s.no_relevant = r.scores[s.index] == 0.0;
    if (s.no_relevant) s.index = 0;
    return s;
}

// ---- Replay volume -------------------------------------------------------------

enum class ReplayCountPolicy { MatchCurrent };

// `match-current`: total replay equals the current task's sample count,
// split equally across trained generators, remainder to the lowest indices.
inline std::vector<std::size_t> replay_counts(ReplayCountPolicy policy,
                                              std::size_t current_n,
                                              const std::vector<bool>& trained) {
    if (current_n < 1) throw DomainError("replay_counts: current_n must be >= 1");
    (void)policy;  // single policy for now
    std::vector<std::size_t> counts(trained.size(), 0);
    std::size_t n_trained = 0;
    for (bool t : trained) n_trained += t ? 1 : 0;
    if (n_trained == 0) return counts;
    const std::size_t share = current_n / n_trained;
    std::size_t remainder = current_n % n_trained;
    for (std::size_t k = 0; k < trained.size(); ++k) {
        if (!trained[k]) continue;
        counts[k] = share + (remainder > 0 ? 1 : 0);
        if (remainder > 0) --remainder;
    }
    return counts;
}

// ---- Scholar -------------------------------------------------------------------

struct ReplaySet {
    std::size_t generator_index = 0;
    TabularDataset features;       // unlabeled rows from the generator
    std::vector<double> targets;   // prior-solver predictions
};

struct Scholar {
    std::vector<Generator> generators;
    std::vector<ConfigVector> configs;  // b_k, parallel to generators
    Solver solver;
    double alpha = 0.5;
    ReplayCountPolicy policy = ReplayCountPolicy::MatchCurrent;
    std::size_t task_index = 0;  // tasks completed
    std::size_t solver_epochs = 100;

    // Telemetry from the most recent learn_task.
    std::size_t last_target = 0;
    bool last_selection_degenerate = false;

    std::size_t generator_count() const { return generators.size(); }

    void validate() const {
        if (generators.empty()) throw DomainError("scholar needs K >= 1 generators");
        if (configs.size() != generators.size())
            throw DimensionError("scholar: one configuration vector per generator");
        for (const auto& b : configs) {
            if (b.role != ConfigRole::Generator)
                throw DomainError("scholar: b_k must have generator role");
            b.validate();
        }
        if (!(alpha >= 0.0 && alpha <= 1.0))
            throw DomainError("scholar: alpha must lie in [0, 1]");
    }

    std::vector<bool> trained_mask() const {
        std::vector<bool> m(generators.size());
        for (std::size_t k = 0; k < generators.size(); ++k)
            m[k] = generators[k].trained;
        return m;
    }

    // Samples replay features from every trained generator's current state
    // and labels them with the current solver (the prior solver, when called
    // at the top of learn_task). Returns an empty list before the first task.
    std::vector<ReplaySet> generate_replay(std::size_t current_n, Rng& rng) const {
        std::vector<ReplaySet> out;
        const auto counts = replay_counts(policy, current_n, trained_mask());
        for (std::size_t k = 0; k < generators.size(); ++k) {
            if (counts[k] == 0) continue;
            Rng gen_rng(mix_seed(rng.next_u64(), "replay-sample", k));
            ReplaySet rs;
            rs.generator_index = k;
            rs.features = generators[k].sample(counts[k], gen_rng);
            rs.targets = solver.predict(
                solver_encode(rs.features.schema, rs.features));
            out.push_back(std::move(rs));
        }
        return out;
    }

    // One continual-learning step on the task's training data.
    void learn_task(const TabularDataset& task_data, const ConfigVector& a,
                    Rng& rng) {
        validate();
        if (task_data.n_rows() == 0)
            throw DomainError("learn_task: task dataset is empty");
        for (const auto& b : configs)
            if (b.size() != a.size())
                throw DimensionError("learn_task: configuration length mismatch");

        // Stage seeds, fixed order.
        const std::uint64_t s_replay = rng.next_u64();
        const std::uint64_t s_solver = rng.next_u64();
        const std::uint64_t s_gen_replay = rng.next_u64();
        const std::uint64_t s_gen_fit = rng.next_u64();

        // (1) Replay from all trained generators, labeled by the prior solver
        // (this->solver has not been updated yet).
        Rng replay_rng(mix_seed(s_replay, "stage-replay"));
        const auto replay = generate_replay(task_data.n_rows(), replay_rng);

        // Solver update on real (alpha) vs pooled replay (1 - alpha).
        WeightedBatches batches;
        batches.alpha = alpha;
        batches.real_x = solver_encode(task_data.schema, task_data);
        batches.real_y = task_data.targets;
        if (!replay.empty()) {
            TabularDataset pooled(task_data.schema);
            for (const auto& rs : replay) {
                pooled.append_dataset(rs.features);
                pooled.targets.insert(pooled.targets.end(), rs.targets.begin(),
                                      rs.targets.end());
            }
            batches.replay_x = solver_encode(pooled.schema, pooled);
            batches.replay_y = pooled.targets;
        }
        solver.observe_features(batches.real_x);
        Rng solver_rng(mix_seed(s_solver, "stage-solver"));
        solver.train_epochs(batches, solver_epochs, solver_rng);

        // (2) Target generator selection.
        const Selection sel = select_target(relevance(a, configs));
        last_target = sel.index;
        last_selection_degenerate = sel.no_relevant;

        // (3) Target generator update on x~ = (x, x'_{k*}); the other
        // generators are untouched.
        Generator& target = generators[sel.index];
        TabularDataset mix(task_data.schema);
        for (std::size_t c = 0; c < task_data.columns.size(); ++c)
            mix.columns[c] = task_data.columns[c];  // features only
        if (target.trained) {
            Rng sample_rng(mix_seed(s_gen_replay, "stage-gen-replay"));
            mix.append_dataset(target.sample(task_data.n_rows(), sample_rng));
        }
        Rng fit_rng(mix_seed(s_gen_fit, "stage-gen-fit"));
        target.fit(mix, fit_rng);

        ++task_index;
    }

    std::size_t generators_serialized_bytes() const {
        std::size_t total = 0;
        for (const auto& g : generators) total += g.serialized_bytes();
        return total;
    }
};

// ---- Checkpointing --------------------------------------------------------------

inline void save_scholar(const Scholar& scholar, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::ordered_json manifest;
    manifest["schema"] = "replayforge-scholar-v1";
    manifest["task_index"] = scholar.task_index;
    manifest["alpha"] = scholar.alpha;
    manifest["solver_epochs"] = scholar.solver_epochs;
    manifest["replay_policy"] = "match-current";
    nlohmann::ordered_json configs = nlohmann::ordered_json::array();
    for (const auto& b : scholar.configs) configs.push_back(b.entries);
    manifest["config_vectors"] = configs;
    manifest["generators"] = scholar.generators.size();
    {
        std::ofstream out(fs::path(dir) / "manifest.json");
        if (!out) throw IoError("cannot write scholar manifest in " + dir);
        out << manifest.dump(2) << '\n';
    }
    write_file((fs::path(dir) / "solver.bin").string(), scholar.solver.serialize());
    for (std::size_t k = 0; k < scholar.generators.size(); ++k)
        write_file((fs::path(dir) / ("generator_" + std::to_string(k) + ".bin"))
                       .string(),
                   scholar.generators[k].serialize());
}

inline Scholar load_scholar(const std::string& dir, const Schema& schema) {
    namespace fs = std::filesystem;
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) throw IoError("cannot open scholar manifest in " + dir);
    nlohmann::json manifest = nlohmann::json::parse(in);
    Scholar scholar;
    scholar.task_index = manifest.at("task_index").get<std::size_t>();
    scholar.alpha = manifest.at("alpha").get<double>();
    scholar.solver_epochs = manifest.at("solver_epochs").get<std::size_t>();
    for (const auto& entries : manifest.at("config_vectors")) {
        ConfigVector b;
        b.role = ConfigRole::Generator;
        b.entries = entries.get<std::vector<double>>();
        scholar.configs.push_back(b);
    }
    scholar.solver =
        Solver::deserialize(read_file((fs::path(dir) / "solver.bin").string()));
    const auto n_gens = manifest.at("generators").get<std::size_t>();
    for (std::size_t k = 0; k < n_gens; ++k)
        scholar.generators.push_back(Generator::deserialize(
            read_file(
                (fs::path(dir) / ("generator_" + std::to_string(k) + ".bin"))
                    .string()),
            schema));
    return scholar;
}

}  // namespace replayforge
