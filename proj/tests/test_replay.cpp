#include "catch_amalgamated.hpp"

#include "replayforge/evaluation.hpp"
#include "replayforge/replay.hpp"

#include <cmath>
#include <filesystem>

using namespace replayforge;

namespace {

Schema mini_schema() {
    Schema s;
    s.columns.push_back({"x", ColumnKind::Continuous, {}});
    s.columns.push_back({"g", ColumnKind::Discrete, {"a", "b"}});
    s.target_name = "y";
    return s;
}

// Cluster per "UE": x ~ N(center, 1), y = slope * x + base + noise.
TabularDataset mini_task(double center, double slope, double base,
                         std::size_t n, std::uint64_t seed) {
    TabularDataset ds(mini_schema());
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = rng.normal(center, 1.0);
        ds.append_row({x, double(rng.below(2))},
                      slope * x + base + rng.normal(0.0, 0.05));
    }
    return ds;
}

ConfigVector task_vec(std::initializer_list<double> entries) {
    ConfigVector a;
    a.role = ConfigRole::Task;
    a.entries = entries;
    return a;
}

ConfigVector gen_vec(std::initializer_list<double> entries) {
    ConfigVector b;
    b.role = ConfigRole::Generator;
    b.entries = entries;
    return b;
}

Scholar mini_scholar(std::size_t K, std::size_t J, std::uint64_t seed,
                     double alpha = 0.5) {
    GeneratorConfig gcfg;
    gcfg.kind = GeneratorKind::TVAE;
    gcfg.latent_dim = 4;
    gcfg.hidden_sizes = {16};
    gcfg.epochs = 25;
    gcfg.batch_size = 128;
    gcfg.max_modes = 4;
    SolverConfig scfg;
    scfg.hidden_sizes = {32, 16};
    scfg.batch_size = 128;

    Scholar scholar;
    scholar.alpha = alpha;
    scholar.solver = Solver(scfg);
    scholar.solver_epochs = 20;
    Rng rng(seed);
    for (std::size_t k = 0; k < K; ++k) {
        Rng init(rng.split());
        scholar.generators.emplace_back(gcfg, mini_schema(), init);
        ConfigVector b;
        b.role = ConfigRole::Generator;
        b.entries.assign(J, K == 1 ? 1.0 : 0.0);
        if (K > 1) b.entries[k] = 1.0;
        scholar.configs.push_back(b);
    }
    return scholar;
}

}  // namespace

TEST_CASE("relevance inner products") {
    // Worked example: one-hot generators, a selects the second.
    std::vector<ConfigVector> bs = {gen_vec({1, 0, 0}), gen_vec({0, 1, 0}),
                                    gen_vec({0, 0, 1})};
    auto r = relevance(task_vec({0, 1, 0}), bs);
    CHECK(r.scores == std::vector<double>{0, 1, 0});

    auto zero = relevance(task_vec({0, 0, 0}), bs);
    CHECK(zero.scores == std::vector<double>{0, 0, 0});

    auto soft = relevance(task_vec({1, 1, 0}), {gen_vec({0.5, 0.5, 0})});
    CHECK(soft.scores[0] == 1.0);

    CHECK_THROWS_AS(relevance(task_vec({1, 0}), bs), DimensionError);
    CHECK_THROWS_AS(relevance(task_vec({0.5, 0.5, 0}), bs), DomainError);
}

TEST_CASE("select_target argmax, tie rule, degenerate case") {
    CHECK(select_target({{0, 1, 0}}).index == 1);

    auto tie = select_target({{0.7, 0.7}});
    CHECK(tie.index == 0);
    CHECK_FALSE(tie.no_relevant);

    auto zero = select_target({{0, 0, 0}});
    CHECK(zero.index == 0);
    CHECK(zero.no_relevant);

    CHECK_THROWS_AS(select_target({{}}), DomainError);
}

TEST_CASE("replay_counts equal split with remainder to low indices") {
    CHECK(replay_counts(ReplayCountPolicy::MatchCurrent, 1000, {true, true}) ==
          std::vector<std::size_t>{500, 500});
    CHECK(replay_counts(ReplayCountPolicy::MatchCurrent, 1001, {true, true}) ==
          std::vector<std::size_t>{501, 500});
    CHECK(replay_counts(ReplayCountPolicy::MatchCurrent, 100, {false, false}) ==
          std::vector<std::size_t>{0, 0});
    CHECK(replay_counts(ReplayCountPolicy::MatchCurrent, 100,
                        {false, true, true, true}) ==
          std::vector<std::size_t>{0, 34, 33, 33});
    CHECK_THROWS_AS(replay_counts(ReplayCountPolicy::MatchCurrent, 0, {true}),
                    DomainError);
}

TEST_CASE("generate_replay: cold start, trained-only, exact prior labels") {
    Scholar scholar = mini_scholar(2, 2, 1);
    Rng rng(2);
    CHECK(scholar.generate_replay(100, rng).empty());

    // Train only generator 0 (task for UE a).
    auto task = mini_task(0.0, 2.0, 10.0, 300, 3);
    Rng lrng(4);
    scholar.learn_task(task, task_vec({1, 0}), lrng);
    REQUIRE(scholar.generators[0].trained);
    REQUIRE_FALSE(scholar.generators[1].trained);

    Rng rrng(5);
    auto replay = scholar.generate_replay(100, rrng);
    REQUIRE(replay.size() == 1);
    CHECK(replay[0].generator_index == 0);
    CHECK(replay[0].features.n_rows() == 100);

    // Targets are bit-identical to calling predict on the features.
    auto again = scholar.solver.predict(
        solver_encode(mini_schema(), replay[0].features));
    CHECK(replay[0].targets == again);
}

TEST_CASE("cold start trains on pure MSE regardless of alpha") {
    Scholar scholar = mini_scholar(1, 1, 6, /*alpha=*/0.25);
    auto task = mini_task(0.0, 2.0, 10.0, 300, 7);
    Rng rng(8);
    scholar.learn_task(task, task_vec({1}), rng);
    for (const auto& sl : scholar.solver.step_losses()) {
        CHECK(sl.replay == 0.0);
        CHECK(sl.total == sl.real);
    }
    CHECK(scholar.task_index == 1);
}

TEST_CASE("K = 1 scholar matches a hand-replicated single-generator update") {
    // Run task 1 on two identical scholars, then drive task 2 through
    // learn_task on one and through the documented stage-seed order by hand
    // on the other; solver states must match bit-for-bit.
    Scholar a = mini_scholar(1, 1, 10);
    Scholar b = mini_scholar(1, 1, 10);
    auto task1 = mini_task(0.0, 2.0, 10.0, 300, 11);
    auto task2 = mini_task(5.0, -1.0, 30.0, 301, 12);

    Rng r1(13), r2(13);
    a.learn_task(task1, task_vec({1}), r1);
    b.learn_task(task1, task_vec({1}), r2);
    REQUIRE(a.solver.serialize() == b.solver.serialize());

    Rng ra(14);
    a.learn_task(task2, task_vec({1}), ra);

    // Hand replication of the Eq.(1)-style single-generator update.
    Rng rb(14);
    const auto s_replay = rb.next_u64();
    const auto s_solver = rb.next_u64();
    const auto s_gen_replay = rb.next_u64();
    const auto s_gen_fit = rb.next_u64();

    Rng replay_rng(mix_seed(s_replay, "stage-replay"));
    auto replay = b.generate_replay(task2.n_rows(), replay_rng);
    REQUIRE(replay.size() == 1);

    WeightedBatches wb;
    wb.alpha = b.alpha;
    wb.real_x = solver_encode(mini_schema(), task2);
    wb.real_y = task2.targets;
    wb.replay_x = solver_encode(mini_schema(), replay[0].features);
    wb.replay_y = replay[0].targets;
    b.solver.observe_features(wb.real_x);
    Rng solver_rng(mix_seed(s_solver, "stage-solver"));
    b.solver.train_epochs(wb, b.solver_epochs, solver_rng);

    TabularDataset mix(mini_schema());
    for (std::size_t c = 0; c < task2.columns.size(); ++c)
        mix.columns[c] = task2.columns[c];
    Rng sample_rng(mix_seed(s_gen_replay, "stage-gen-replay"));
    mix.append_dataset(b.generators[0].sample(task2.n_rows(), sample_rng));
    Rng fit_rng(mix_seed(s_gen_fit, "stage-gen-fit"));
    b.generators[0].fit(mix, fit_rng);

    CHECK(a.solver.serialize() == b.solver.serialize());
    CHECK(a.generators[0].serialize() == b.generators[0].serialize());

    // Loss decomposition recorded by the scholar run matches Eq.(1) algebra.
    for (const auto& sl : a.solver.step_losses())
        CHECK(std::abs(sl.total - (a.alpha * sl.real +
                                   (1 - a.alpha) * sl.replay)) <= 1e-10);
}

TEST_CASE("non-target generators stay byte-identical across tasks") {
    Scholar scholar = mini_scholar(2, 2, 20);
    auto ue_a = [&](std::uint64_t s) { return mini_task(0.0, 2.0, 10.0, 250, s); };
    auto ue_b = [&](std::uint64_t s) { return mini_task(6.0, -1.5, 25.0, 250, s); };

    Rng rng(21);
    std::uint64_t next_data_seed = 100;
    for (int step = 0; step < 6; ++step) {
        const bool is_a = step % 2 == 0;
        const auto before0 = scholar.generators[0].serialize();
        const auto before1 = scholar.generators[1].serialize();
        scholar.learn_task(is_a ? ue_a(next_data_seed) : ue_b(next_data_seed),
                           is_a ? task_vec({1, 0}) : task_vec({0, 1}), rng);
        ++next_data_seed;
        CHECK(scholar.last_target == (is_a ? 0u : 1u));
        // The non-target generator's bytes are untouched; the target's change.
        if (is_a) {
            CHECK(scholar.generators[1].serialize() == before1);
            CHECK(scholar.generators[0].serialize() != before0);
        } else {
            CHECK(scholar.generators[0].serialize() == before0);
            CHECK(scholar.generators[1].serialize() != before1);
        }
    }
}

TEST_CASE("no relevant generator: proceeds with generator 0 and warns") {
    Scholar scholar = mini_scholar(2, 2, 30);
    auto task = mini_task(0.0, 2.0, 10.0, 200, 31);
    Rng rng(32);
    scholar.learn_task(task, task_vec({0, 0}), rng);
    CHECK(scholar.last_selection_degenerate);
    CHECK(scholar.last_target == 0);
    CHECK(scholar.generators[0].trained);
}

TEST_CASE("two identical tasks show no forgetting signal") {
    Scholar scholar = mini_scholar(1, 1, 40);
    // Enough epochs that task 1 converges; otherwise task 2 continues the
    // descent and the comparison measures optimization, not forgetting.
    scholar.solver_epochs = 100;
    auto task = mini_task(0.0, 2.0, 10.0, 600, 41);
    Rng split_rng(42);
    auto split = split_train_test(task, 0.7, split_rng);

    Rng rng(43);
    scholar.learn_task(split.train, task_vec({1}), rng);
    const auto x_test = solver_encode(mini_schema(), split.test);
    const double mape1 = mape(split.test.targets, scholar.solver.predict(x_test));

    scholar.learn_task(split.train, task_vec({1}), rng);
    const double mape2 = mape(split.test.targets, scholar.solver.predict(x_test));

    INFO("task-1 MAPE " << mape1 << " task-2 MAPE " << mape2);
    CHECK(std::abs(mape2 - mape1) <= 0.2 * std::max(mape1, mape2) + 0.05);
}

TEST_CASE("scholar checkpoint round trip") {
    namespace fs = std::filesystem;
    Scholar scholar = mini_scholar(2, 2, 50);
    Rng rng(51);
    scholar.learn_task(mini_task(0.0, 2.0, 10.0, 250, 52), task_vec({1, 0}), rng);
    scholar.learn_task(mini_task(6.0, -1.5, 25.0, 250, 53), task_vec({0, 1}), rng);

    const auto dir = (fs::temp_directory_path() / "rf_scholar_ckpt").string();
    fs::remove_all(dir);
    save_scholar(scholar, dir);
    Scholar loaded = load_scholar(dir, mini_schema());

    CHECK(loaded.task_index == scholar.task_index);
    CHECK(loaded.alpha == scholar.alpha);
    CHECK(loaded.solver.serialize() == scholar.solver.serialize());
    REQUIRE(loaded.generators.size() == 2);
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(loaded.generators[k].serialize() ==
              scholar.generators[k].serialize());
        CHECK(loaded.configs[k].entries == scholar.configs[k].entries);
    }

    // Continuing from the checkpoint matches continuing the original.
    auto task3 = mini_task(0.0, 2.0, 10.0, 250, 54);
    Rng ra(55), rb(55);
    scholar.learn_task(task3, task_vec({1, 0}), ra);
    loaded.learn_task(task3, task_vec({1, 0}), rb);
    CHECK(scholar.solver.serialize() == loaded.solver.serialize());
    CHECK(scholar.generators[0].serialize() == loaded.generators[0].serialize());
    fs::remove_all(dir);
}

TEST_CASE("scaling every b_k by a positive constant never changes the target") {
    Rng rng(60);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t J = 1 + rng.below(4);
        const std::size_t K = 1 + rng.below(4);
        std::vector<ConfigVector> bs;
        for (std::size_t k = 0; k < K; ++k) {
            ConfigVector b;
            b.role = ConfigRole::Generator;
            for (std::size_t j = 0; j < J; ++j)
                b.entries.push_back(rng.below(3) * 0.5);
            bs.push_back(b);
        }
        ConfigVector a;
        a.role = ConfigRole::Task;
        for (std::size_t j = 0; j < J; ++j)
            a.entries.push_back(double(rng.below(2)));

        const auto base = select_target(relevance(a, bs));
        for (double scale : {0.25, 2.0, 7.3}) {
            auto scaled = bs;
            for (auto& b : scaled) {
                b.role = ConfigRole::Generator;
                for (double& v : b.entries) v *= scale;
            }
            // Scaled entries may leave [0,1]; bypass role validation by
            // computing relevance scores directly.
            RelevanceVector r;
            for (const auto& b : scaled) {
                double dot = 0.0;
                for (std::size_t j = 0; j < J; ++j)
                    dot += b.entries[j] * a.entries[j];
                r.scores.push_back(dot);
            }
            CHECK(select_target(r).index == base.index);
        }
    }
}
