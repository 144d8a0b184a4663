#include "catch_amalgamated.hpp"

#include "replayforge/scenario.hpp"

#include <algorithm>
#include <cmath>

using namespace replayforge;

namespace {

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        const double fa = double(i) / double(a.size());
        const double fb = double(j) / double(b.size());
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

double mean_of(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    return m / double(v.size());
}

}  // namespace

TEST_CASE("the eight case tables match the published rows cell-for-cell") {
    const std::vector<std::vector<int>> ue = {
        {2, 1, 2, 1, 2, 1, 2, 1, 2, 1, 2, 1},
        {1, 2, 1, 2, 1, 2, 1, 2, 1, 2, 1, 2},
        {2, 3, 2, 3, 2, 3, 2, 3, 2, 3, 2, 3},
        {3, 2, 3, 2, 3, 2, 3, 2, 3, 2, 3, 2},
        {3, 1, 3, 1, 3, 1, 3, 1, 3, 1, 3, 1},
        {1, 3, 1, 3, 1, 3, 1, 3, 1, 3, 1, 3},
        {2, 3, 1, 2, 3, 1, 2, 3, 1, 2, 3, 1, 2, 3, 1, 2, 3, 1},
        {1, 3, 2, 1, 3, 2, 1, 3, 2, 1, 3, 2, 1, 3, 2, 1, 3, 2},
    };
    const std::vector<std::vector<int>> pp = {
        {1, 1, 3, 3, 2, 2, 4, 4, 6, 6, 5, 5},
        {5, 5, 6, 6, 4, 4, 2, 2, 3, 3, 1, 1},
        {1, 1, 3, 3, 2, 2, 4, 4, 6, 6, 5, 5},
        {5, 5, 6, 6, 4, 4, 2, 2, 3, 3, 1, 1},
        {1, 1, 3, 3, 2, 2, 4, 4, 6, 6, 5, 5},
        {5, 5, 6, 6, 4, 4, 2, 2, 3, 3, 1, 1},
        {1, 1, 1, 3, 3, 3, 2, 2, 2, 4, 4, 4, 6, 6, 6, 5, 5, 5},
        {5, 5, 5, 6, 6, 6, 4, 4, 4, 2, 2, 2, 3, 3, 3, 1, 1, 1},
    };
    for (int case_id = 1; case_id <= 8; ++case_id) {
        const auto& table = case_table(case_id);
        CHECK(table.ue_row == ue[case_id - 1]);
        CHECK(table.p_row == pp[case_id - 1]);
    }
    CHECK_THROWS_AS(case_table(0), DomainError);
    CHECK_THROWS_AS(case_table(9), DomainError);
}

TEST_CASE("sequence sizes and first tasks") {
    auto seq1 = build_sequence(1, 50, 1);
    REQUIRE(seq1.size() == 12);
    CHECK(seq1[0].ue_type == 2);
    CHECK(seq1[0].pattern == 1);

    auto seq8 = build_sequence(8, 50, 1);
    REQUIRE(seq8.size() == 18);
    CHECK(seq8[0].ue_type == 1);
    CHECK(seq8[0].pattern == 5);

    CHECK(build_sequence(3, 50, 1).size() == 12);
    CHECK(build_sequence(7, 50, 1).size() == 18);
}

TEST_CASE("task configuration vectors are one-hot over the sequence UE set") {
    CHECK(task_config_vector(2, 3).entries == std::vector<double>{0, 1, 0});
    CHECK(task_config_vector(1, 2).entries == std::vector<double>{1, 0});
    CHECK(task_config_vector(3, 3).entries == std::vector<double>{0, 0, 1});
    CHECK_THROWS_AS(task_config_vector(4, 3), DomainError);

    // Case 3 uses UEs {2, 3}: UE2 maps to slot 0, UE3 to slot 1.
    auto seq = build_sequence(3, 20, 1);
    CHECK(seq[0].config_vector.entries == std::vector<double>{1, 0});
    CHECK(seq[1].config_vector.entries == std::vector<double>{0, 1});

    // Group 2 uses all three UEs.
    auto seq7 = build_sequence(7, 20, 1);
    CHECK(seq7[0].config_vector.entries == std::vector<double>{0, 1, 0});
    CHECK(seq7[1].config_vector.entries == std::vector<double>{0, 0, 1});
    CHECK(seq7[2].config_vector.entries == std::vector<double>{1, 0, 0});
}

TEST_CASE("synthesis is bit-deterministic in (inputs, seed)") {
    const std::vector<double> loads(kLoadLevelsMbps.begin(),
                                    kLoadLevelsMbps.end());
    auto a = synthesize_task_data(1, 4, loads, 500, 99);
    auto b = synthesize_task_data(1, 4, loads, 500, 99);
    for (std::size_t c = 0; c < a.columns.size(); ++c)
        CHECK(a.columns[c] == b.columns[c]);
    CHECK(a.targets == b.targets);

    auto c = synthesize_task_data(1, 4, loads, 500, 100);
    CHECK(a.targets != c.targets);
}

TEST_CASE("zero load and good channel pins OWD at the UE base") {
    SynthOptions no_spikes;
    no_spikes.spikes = false;
    for (int ue = 1; ue <= 3; ++ue) {
        auto ds = synthesize_task_data(ue, 1, {0.0}, 4000, 7, no_spikes);
        const double base = kUeBaseOwdMs[ue - 1];
        CHECK(std::abs(mean_of(ds.targets) - base) < 3.0 * kOwdNoiseSigma);
        // Individual rows stay within a loose noise envelope.
        for (double y : ds.targets) CHECK(std::abs(y - base) < 6.0 * kOwdNoiseSigma);
    }
}

TEST_CASE("UE base OWDs differ by at least 5 ms at matched conditions") {
    SynthOptions no_spikes;
    no_spikes.spikes = false;
    auto ue1 = synthesize_task_data(1, 2, {30.0}, 3000, 8, no_spikes);
    auto ue3 = synthesize_task_data(3, 2, {30.0}, 3000, 8, no_spikes);
    CHECK(std::abs(mean_of(ue3.targets) - mean_of(ue1.targets)) >= 5.0);
}

TEST_CASE("suppressing spikes changes only the target column") {
    const std::vector<double> loads(kLoadLevelsMbps.begin(),
                                    kLoadLevelsMbps.end());
    SynthOptions no_spikes;
    no_spikes.spikes = false;
    auto with = synthesize_task_data(2, 5, loads, 800, 9);
    auto without = synthesize_task_data(2, 5, loads, 800, 9, no_spikes);
    for (std::size_t c = 0; c < with.columns.size(); ++c)
        CHECK(with.columns[c] == without.columns[c]);
    std::size_t spiked = 0;
    for (std::size_t r = 0; r < with.n_rows(); ++r) {
        CHECK(with.targets[r] >= without.targets[r]);
        spiked += with.targets[r] > without.targets[r] ? 1 : 0;
    }
    // Mean spike probability across loads is 0.02 + 0.03 * mean(l)/60 = 0.035.
    CHECK(spiked > 800 * 0.035 * 0.4);
    CHECK(spiked < 800 * 0.035 * 2.5);
}

TEST_CASE("tasks differing in UE type shift the OWD distribution (KS > 0.2)") {
    auto seq = build_sequence(1, 800, 3);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        for (std::size_t j = i + 1; j < seq.size(); ++j) {
            if (seq[i].ue_type == seq[j].ue_type) continue;
            const double ks =
                ks_statistic(seq[i].dataset.targets, seq[j].dataset.targets);
            INFO("tasks " << i + 1 << " (UE" << seq[i].ue_type << ") vs "
                          << j + 1 << " (UE" << seq[j].ue_type << ")");
            CHECK(ks > 0.2);
        }
    }
}

TEST_CASE("synthesized datasets validate and export round-trips") {
    auto seq = build_sequence(2, 120, 4);
    for (const auto& task : seq) CHECK_NOTHROW(task.dataset.validate());

    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "rf_export_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    save_schema(seq[0].dataset.schema, (dir / "schema.txt").string());
    save_csv(seq[0].dataset, (dir / "task01.csv").string());
    Schema schema = load_schema((dir / "schema.txt").string());
    auto back = load_csv((dir / "task01.csv").string(), schema);
    REQUIRE(back.n_rows() == seq[0].dataset.n_rows());
    for (std::size_t r = 0; r < back.n_rows(); ++r)
        CHECK(back.targets[r] == seq[0].dataset.targets[r]);
    fs::remove_all(dir);
}

TEST_CASE("moving patterns sweep the documented quality trajectories") {
    CHECK(pattern_quality(1, 0.5) == 0.9);
    CHECK(pattern_quality(2, 0.1) == 0.6);
    CHECK(pattern_quality(3, 0.9) == 0.3);
    // P4 piecewise-constant cycle.
    CHECK(pattern_quality(4, 0.0) == 0.9);
    CHECK(pattern_quality(4, 0.130) == 0.6);
    CHECK(pattern_quality(4, 0.26) == 0.3);
    CHECK(pattern_quality(4, 0.38) == 0.6);
    CHECK(pattern_quality(4, 0.51) == 0.9);
    // P5 zigzag hits the three positions.
    CHECK(pattern_quality(5, 0.0) == Catch::Approx(0.9));
    CHECK(pattern_quality(5, 1.0 / 3.0) == Catch::Approx(0.6));
    CHECK(pattern_quality(5, 2.0 / 3.0) == Catch::Approx(0.3));
    // P6 linear sweep out and back.
    CHECK(pattern_quality(6, 0.0) == Catch::Approx(0.9));
    CHECK(pattern_quality(6, 0.5) == Catch::Approx(0.3));
    CHECK(pattern_quality(6, 0.9999) == Catch::Approx(0.9).margin(1e-3));
    CHECK_THROWS_AS(pattern_quality(7, 0.0), DomainError);
}

TEST_CASE("explicit rows build custom sequences") {
    SequenceSpec spec;
    spec.ue_row = {1, 2, 1};
    spec.p_row = {1, 2, 3};
    spec.samples_per_task = 40;
    spec.seed = 11;
    auto seq = build_sequence(spec);
    REQUIRE(seq.size() == 3);
    CHECK(seq[0].config_vector.entries == std::vector<double>{1, 0});
    CHECK(seq[1].config_vector.entries == std::vector<double>{0, 1});

    SequenceSpec bad;
    bad.ue_row = {1, 2};
    bad.p_row = {1};
    CHECK_THROWS_AS(build_sequence(bad), DomainError);
    CHECK_THROWS_AS(build_sequence(9, 10, 1), DomainError);
}
