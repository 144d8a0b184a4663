// Task sequences and the deterministic synthetic OWD dataset generator.
//
// The eight case sequences reproduce the benchmark's UE/position rows
// cell-for-cell. The data generator stands in for testbed measurements: each
// row mixes an uplink load level (7 discrete steps, 0..60 Mbps), a channel
// quality derived from the position/movement pattern, and a UE-specific
// mixing of 16 continuous features. The OWD target is
//
//   owd = base(ue) + 0.06 * load / (q + 0.1) + noise [+ lognormal spike]
//
// with spike probability 0.02 + 0.03 * load / 60. All recipe constants are
// frozen in the tables below so tests can cite them.
#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "replayforge/common.hpp"
#include "replayforge/replay.hpp"
#include "replayforge/tabular.hpp"

namespace replayforge {

// ---- Frozen recipe constants -------------------------------------------------

constexpr std::size_t kNumSynthFeatures = 16;
constexpr std::array<double, 7> kLoadLevelsMbps = {0, 10, 20, 30, 40, 50, 60};

constexpr std::array<double, kNumSynthFeatures> kFeatureLoadCoef = {
    0.8, -0.5, 1.2, 0.0, 0.6, -1.0, 0.3, 0.9,
    -0.7, 0.5, 1.1, -0.2, 0.4, 0.0, -0.6, 0.7};
constexpr std::array<double, kNumSynthFeatures> kFeatureQualityCoef = {
    -1.1, 0.9, 0.2, 1.4, -0.3, 0.5, -0.8, 0.1,
    1.0, -0.4, 0.6, 1.2, -0.9, 0.8, 0.3, -0.5};
constexpr std::array<double, kNumSynthFeatures> kFeatureOffset = {
    0.2, 1.0, -0.4, 0.6, 1.3, -0.2, 0.8, -0.6,
    0.4, 1.1, -0.8, 0.3, 0.9, -0.1, 0.5, 1.2};

// Per-UE multiplicative mixing of the features; the three vectors are
// deliberately far apart so UE types occupy distinct feature regions.
constexpr std::array<std::array<double, kNumSynthFeatures>, 3> kUeMixing = {{
    {1.0, 0.5, 1.5, 0.8, 1.2, 0.6, 1.1, 0.9, 1.3, 0.7, 1.0, 1.4, 0.8, 1.2, 0.9, 1.1},
    {1.8, 1.2, 0.4, 1.6, 0.3, 1.5, 0.7, 1.9, 0.5, 1.3, 1.7, 0.2, 1.5, 0.6, 1.8, 0.4},
    {0.3, 2.1, 0.9, 0.2, 2.0, 0.8, 2.2, 0.4, 1.8, 2.3, 0.6, 1.9, 0.3, 2.1, 0.7, 2.0},
}};

constexpr std::array<double, 3> kUeBaseOwdMs = {4.0, 7.0, 11.0};
constexpr double kLoadOwdCoef = 0.06;
constexpr double kFeatureNoiseSigma = 0.05;
constexpr double kOwdNoiseSigma = 0.05;
constexpr double kSpikeBaseProb = 0.02;
constexpr double kSpikeLoadProb = 0.03;
constexpr double kSpikeLogMu = 2.0;
constexpr double kSpikeLogSigma = 0.8;

// Channel quality per pattern. Stationary positions map to fixed values;
// moving patterns sweep a fixed trajectory over the task's row phase.
inline double pattern_quality(int pattern, double phase) {
    auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
    switch (pattern) {
        case 1: return 0.9;
        case 2: return 0.6;
        case 3: return 0.3;
        case 4: {  // rectangular: piecewise-constant cycle, two laps
            static constexpr std::array<double, 4> steps = {0.9, 0.6, 0.3, 0.6};
            const auto seg = static_cast<std::size_t>(phase * 8.0) % 4;
            return steps[seg];
        }
        case 5: {  // zigzag 1 -> 2 -> 3 -> 1
            const double t = phase * 3.0;
            if (t < 1.0) return lerp(0.9, 0.6, t);
            if (t < 2.0) return lerp(0.6, 0.3, t - 1.0);
            return lerp(0.3, 0.9, t - 2.0);
        }
        case 6: {  // linear sweep 1 -> 3 -> 1
            const double t = phase * 2.0;
            return t < 1.0 ? lerp(0.9, 0.3, t) : lerp(0.3, 0.9, t - 1.0);
        }
        default:
            throw DomainError("pattern must be 1..6");
    }
}

inline Schema owd_schema() {
    Schema s;
    for (std::size_t j = 0; j < kNumSynthFeatures; ++j) {
        Column c;
        c.name = "bb" + std::string(j < 10 ? "0" : "") + std::to_string(j);
        c.kind = ColumnKind::Continuous;
        s.columns.push_back(c);
    }
    Column load;
    load.name = "ul_load_mbps";
    load.kind = ColumnKind::Discrete;
    for (double lv : kLoadLevelsMbps)
        load.categories.push_back(std::to_string(static_cast<int>(lv)));
    s.columns.push_back(load);
    s.target_name = "owd_ms";
    return s;
}

struct SynthOptions {
    bool spikes = true;
};

// Deterministic synthetic task data. Per-row draw order is fixed: load
// level, 16 feature noises, OWD noise, spike coin, spike excursion (the
// excursion is drawn whenever the coin lands, so disabling spikes changes
// only the target).
inline TabularDataset synthesize_task_data(int ue_type, int pattern,
                                           const std::vector<double>& loads,
                                           std::size_t n, std::uint64_t seed,
                                           const SynthOptions& options = {}) {
    if (n < 1) throw DomainError("synthesize_task_data: n must be >= 1");
    if (ue_type < 1 || ue_type > 3)
        throw DomainError("synthesize_task_data: ue_type must be 1..3");
    if (loads.empty())
        throw DomainError("synthesize_task_data: loads must be non-empty");
    const Schema schema = owd_schema();
    TabularDataset ds(schema);
    Rng rng(seed);
    const auto& mix = kUeMixing[static_cast<std::size_t>(ue_type - 1)];
    const double base = kUeBaseOwdMs[static_cast<std::size_t>(ue_type - 1)];
    std::vector<double> row(schema.columns.size());
    for (std::size_t r = 0; r < n; ++r) {
        const double phase = static_cast<double>(r) / static_cast<double>(n);
        const std::size_t load_idx = rng.below(loads.size());
        const double load = loads[load_idx];
        const double q = pattern_quality(pattern, phase);
        for (std::size_t j = 0; j < kNumSynthFeatures; ++j) {
            const double clean = mix[j] * (kFeatureLoadCoef[j] * (load / 60.0) +
                                           kFeatureQualityCoef[j] * q +
                                           kFeatureOffset[j]);
            row[j] = clean + rng.normal(0.0, kFeatureNoiseSigma);
        }
        // Discrete load category: index into the full 7-level table.
        std::size_t cat = 0;
        for (std::size_t c = 0; c < kLoadLevelsMbps.size(); ++c)
            if (kLoadLevelsMbps[c] == load) cat = c;
        row[kNumSynthFeatures] = static_cast<double>(cat);

        double owd = base + kLoadOwdCoef * load / (q + 0.1) +
                     rng.normal(0.0, kOwdNoiseSigma);
        const double p_spike = kSpikeBaseProb + kSpikeLoadProb * load / 60.0;
        if (rng.bernoulli(p_spike)) {
            const double excursion = rng.lognormal(kSpikeLogMu, kSpikeLogSigma);
            if (options.spikes) owd += excursion;
        }
        ds.append_row(row, owd);
    }
    return ds;
}

// ---- Task sequences ------------------------------------------------------------

struct TaskCondition {
    std::size_t task_id = 0;  // 1-based position in the sequence
    int ue_type = 1;          // 1..3
    int pattern = 1;          // 1..6
    std::vector<double> loads;  // load levels mixed within the task
    ConfigVector config_vector;  // one-hot over the sequence's UE set
    TabularDataset dataset;
};

struct SequenceSpec {
    int case_id = 0;  // 1..8; 0 means explicit rows below
    std::vector<int> ue_row;
    std::vector<int> p_row;
    std::size_t samples_per_task = 2000;
    std::uint64_t seed = 1;
};

struct CaseTable {
    std::vector<int> ue_row;
    std::vector<int> p_row;
};

inline const CaseTable& case_table(int case_id) {
    static const std::vector<CaseTable> tables = {
        /* 1 */ {{2, 1, 2, 1, 2, 1, 2, 1, 2, 1, 2, 1},
                 {1, 1, 3, 3, 2, 2, 4, 4, 6, 6, 5, 5}},
        /* 2 */ {{1, 2, 1, 2, 1, 2, 1, 2, 1, 2, 1, 2},
                 {5, 5, 6, 6, 4, 4, 2, 2, 3, 3, 1, 1}},
        /* 3 */ {{2, 3, 2, 3, 2, 3, 2, 3, 2, 3, 2, 3},
                 {1, 1, 3, 3, 2, 2, 4, 4, 6, 6, 5, 5}},
        /* 4 */ {{3, 2, 3, 2, 3, 2, 3, 2, 3, 2, 3, 2},
                 {5, 5, 6, 6, 4, 4, 2, 2, 3, 3, 1, 1}},
        /* 5 */ {{3, 1, 3, 1, 3, 1, 3, 1, 3, 1, 3, 1},
                 {1, 1, 3, 3, 2, 2, 4, 4, 6, 6, 5, 5}},
        /* 6 */ {{1, 3, 1, 3, 1, 3, 1, 3, 1, 3, 1, 3},
                 {5, 5, 6, 6, 4, 4, 2, 2, 3, 3, 1, 1}},
        /* 7 */ {{2, 3, 1, 2, 3, 1, 2, 3, 1, 2, 3, 1, 2, 3, 1, 2, 3, 1},
                 {1, 1, 1, 3, 3, 3, 2, 2, 2, 4, 4, 4, 6, 6, 6, 5, 5, 5}},
        /* 8 */ {{1, 3, 2, 1, 3, 2, 1, 3, 2, 1, 3, 2, 1, 3, 2, 1, 3, 2},
                 {5, 5, 5, 6, 6, 6, 4, 4, 4, 2, 2, 2, 3, 3, 3, 1, 1, 1}},
    };
    if (case_id < 1 || case_id > 8)
        throw DomainError("case_id must be 1..8");
    return tables[static_cast<std::size_t>(case_id - 1)];
}

// One-hot binary task configuration vector (1-based index).
inline ConfigVector task_config_vector(std::size_t ue_index, std::size_t length) {
    if (ue_index < 1 || ue_index > length)
        throw DomainError("task_config_vector: index out of range");
    ConfigVector a;
    a.role = ConfigRole::Task;
    a.entries.assign(length, 0.0);
    a.entries[ue_index - 1] = 1.0;
    return a;
}

// Distinct UE types appearing in a row, ascending.
inline std::vector<int> distinct_ue_types(const std::vector<int>& ue_row) {
    std::vector<int> ues;
    for (int ue : ue_row)
        if (std::find(ues.begin(), ues.end(), ue) == ues.end()) ues.push_back(ue);
    std::sort(ues.begin(), ues.end());
    return ues;
}

inline std::vector<TaskCondition> build_sequence(const SequenceSpec& spec) {
    std::vector<int> ue_row = spec.ue_row;
    std::vector<int> p_row = spec.p_row;
    if (spec.case_id != 0) {
        const auto& table = case_table(spec.case_id);
        ue_row = table.ue_row;
        p_row = table.p_row;
    }
    if (ue_row.empty() || ue_row.size() != p_row.size())
        throw DomainError("sequence rows must be non-empty and equal length");
    if (spec.samples_per_task < 1)
        throw DomainError("samples_per_task must be >= 1");

    const auto ues = distinct_ue_types(ue_row);
    const std::vector<double> loads(kLoadLevelsMbps.begin(), kLoadLevelsMbps.end());
    std::vector<TaskCondition> tasks;
    tasks.reserve(ue_row.size());
    for (std::size_t i = 0; i < ue_row.size(); ++i) {
        TaskCondition t;
        t.task_id = i + 1;
        t.ue_type = ue_row[i];
        t.pattern = p_row[i];
        t.loads = loads;
        const auto pos = static_cast<std::size_t>(
            std::find(ues.begin(), ues.end(), t.ue_type) - ues.begin());
        t.config_vector = task_config_vector(pos + 1, ues.size());
        t.dataset = synthesize_task_data(
            t.ue_type, t.pattern, loads, spec.samples_per_task,
            mix_seed(spec.seed, "task-data", i));
        tasks.push_back(std::move(t));
    }
    return tasks;
}

inline std::vector<TaskCondition> build_sequence(int case_id,
                                                 std::size_t samples_per_task,
                                                 std::uint64_t seed) {
    SequenceSpec spec;
    spec.case_id = case_id;
    spec.samples_per_task = samples_per_task;
    spec.seed = seed;
    return build_sequence(spec);
}

}  // namespace replayforge
