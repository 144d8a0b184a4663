#include "catch_amalgamated.hpp"

#include "replayforge/cli.hpp"

#include <filesystem>
#include <fstream>

using namespace replayforge;
namespace fs = std::filesystem;

namespace {

int run_cli(std::initializer_list<const char*> args) {
    std::vector<const char*> argv = {"replayforge"};
    argv.insert(argv.end(), args.begin(), args.end());
    return cli::run_main(static_cast<int>(argv.size()), argv.data());
}

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string write_tiny_scenario(const fs::path& dir) {
    const auto path = dir / "scenario.txt";
    std::ofstream out(path);
    out << "# tiny smoke scenario\n"
        << "ue_row = 2,1,2,1\n"
        << "p_row = 1,1,2,2\n"
        << "samples_per_task = 200\n"
        << "seed = 3\n"
        << "alpha = 0.5\n"
        << "methods = naive,cumulative\n"
        << "solver_epochs = 8\n"
        << "gen_epochs = 8\n"
        << "batch_size = 128\n"
        << "max_modes = 3\n"
        << "latent_dim = 4\n";
    return path.string();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

// Report bytes with the wall-time line blanked (the one nondeterministic field).
std::string report_bytes_masked(const fs::path& p) {
    std::string s = slurp(p);
    const auto at = s.find("\"wall_time_seconds\"");
    REQUIRE(at != std::string::npos);
    const auto end = s.find('\n', at);
    s.replace(at, end - at, "\"wall_time_seconds\": X");
    return s;
}

}  // namespace

TEST_CASE("run: tiny scenario produces reports and a comparison CSV") {
    const auto dir = fresh_dir("rf_cli_run");
    const auto scenario = write_tiny_scenario(dir);
    const auto out = (dir / "out").string();
    const int rc =
        run_cli({"run", "--scenario", scenario.c_str(), "--out", out.c_str()});
    CHECK(rc == 0);
    CHECK(fs::exists(fs::path(out) / "run-naive-custom-seed3.json"));
    CHECK(fs::exists(fs::path(out) / "run-cumulative-custom-seed3.json"));
    CHECK(fs::exists(fs::path(out) / "comparison.csv"));

    const std::string csv = slurp(fs::path(out) / "comparison.csv");
    CHECK(csv.rfind("method,case,seed,metric,k,value\n", 0) == 0);
    CHECK(csv.find("naive,0,3,ave_mape") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("run: unknown method exits with code 2 and names valid methods") {
    const auto dir = fresh_dir("rf_cli_badmethod");
    const int rc = run_cli({"run", "--case", "1", "--methods", "frobnicate",
                            "--seeds", "1", "--samples", "50",
                            "--out", (dir / "out").string().c_str()});
    CHECK(rc == 2);
    fs::remove_all(dir);
}

TEST_CASE("run: missing case and scenario exits 2") {
    CHECK(run_cli({"run", "--methods", "naive"}) == 2);
}

TEST_CASE("run: bad scenario key exits 2") {
    const auto dir = fresh_dir("rf_cli_badkey");
    const auto path = dir / "scenario.txt";
    {
        std::ofstream out(path);
        out << "case_id = 1\nbogus_key = 5\n";
    }
    CHECK(run_cli({"run", "--scenario", path.string().c_str()}) == 2);
    fs::remove_all(dir);
}

TEST_CASE("rerun with identical config is byte-identical modulo wall time") {
    const auto dir = fresh_dir("rf_cli_determinism");
    const auto scenario = write_tiny_scenario(dir);
    const auto out1 = (dir / "out1").string();
    const auto out2 = (dir / "out2").string();
    REQUIRE(run_cli({"run", "--scenario", scenario.c_str(), "--methods", "naive",
                     "--out", out1.c_str()}) == 0);
    REQUIRE(run_cli({"run", "--scenario", scenario.c_str(), "--methods", "naive",
                     "--out", out2.c_str()}) == 0);
    CHECK(report_bytes_masked(fs::path(out1) / "run-naive-custom-seed3.json") ==
          report_bytes_masked(fs::path(out2) / "run-naive-custom-seed3.json"));
    CHECK(slurp(fs::path(out1) / "comparison.csv") ==
          slurp(fs::path(out2) / "comparison.csv"));
    fs::remove_all(dir);
}

TEST_CASE("export-data writes one CSV per task plus a schema sidecar") {
    const auto dir = fresh_dir("rf_cli_export");
    const auto out = (dir / "data").string();
    REQUIRE(run_cli({"export-data", "--case", "1", "--out", out.c_str(),
                     "--seed", "2", "--samples", "60"}) == 0);
    std::size_t csvs = 0;
    for (const auto& e : fs::directory_iterator(out))
        if (e.path().extension() == ".csv") ++csvs;
    CHECK(csvs == 12);
    CHECK(fs::exists(fs::path(out) / "schema.txt"));

    // Exported data loads back through the documented formats.
    Schema schema = load_schema((fs::path(out) / "schema.txt").string());
    auto ds = load_csv((fs::path(out) / "case1_task01.csv").string(), schema);
    CHECK(ds.n_rows() == 60);

    // Same seed twice gives identical files.
    const auto out2 = (dir / "data2").string();
    REQUIRE(run_cli({"export-data", "--case", "1", "--out", out2.c_str(),
                     "--seed", "2", "--samples", "60"}) == 0);
    CHECK(slurp(fs::path(out) / "case1_task01.csv") ==
          slurp(fs::path(out2) / "case1_task01.csv"));

    const auto out3 = (dir / "data3").string();
    REQUIRE(run_cli({"export-data", "--case", "7", "--out", out3.c_str(),
                     "--samples", "30"}) == 0);
    std::size_t csvs7 = 0;
    for (const auto& e : fs::directory_iterator(out3))
        if (e.path().extension() == ".csv") ++csvs7;
    CHECK(csvs7 == 18);
    fs::remove_all(dir);
}

TEST_CASE("report: summarizes run directories and fails cleanly otherwise") {
    const auto dir = fresh_dir("rf_cli_report");
    const auto scenario = write_tiny_scenario(dir);
    const auto out = (dir / "out").string();
    REQUIRE(run_cli({"run", "--scenario", scenario.c_str(), "--out",
                     out.c_str()}) == 0);
    CHECK(run_cli({"report", out.c_str()}) == 0);
    CHECK(run_cli({"report", out.c_str(), "--metric", "f_k", "--k", "2"}) == 0);
    CHECK(run_cli({"report", out.c_str(), "--tail"}) == 0);

    const auto empty = fresh_dir("rf_cli_report_empty");
    CHECK(run_cli({"report", empty.string().c_str()}) == 1);

    // Corrupt report file.
    {
        std::ofstream bad(empty / "run-bogus.json");
        bad << "{ not json";
    }
    CHECK(run_cli({"report", empty.string().c_str()}) == 1);
    fs::remove_all(dir);
    fs::remove_all(empty);
}

TEST_CASE("checkpoint + resume reproduces the uninterrupted run") {
    const auto dir = fresh_dir("rf_cli_resume");
    const auto scenario = write_tiny_scenario(dir);
    const auto full_out = (dir / "full").string();
    const auto ckpt = (dir / "ckpt").string();
    const auto part_out = (dir / "part").string();
    const auto resumed_out = (dir / "resumed").string();

    // Uninterrupted reference run.
    REQUIRE(run_cli({"run", "--scenario", scenario.c_str(), "--methods",
                     "multigen-tvae", "--out", full_out.c_str()}) == 0);

    // Checkpointed run (writes state after every task), then resume from the
    // final checkpoint; since all tasks completed, resume just rebuilds the
    // report from the manifest state.
    REQUIRE(run_cli({"run", "--scenario", scenario.c_str(), "--methods",
                     "multigen-tvae", "--out", part_out.c_str(),
                     "--checkpoint", ckpt.c_str()}) == 0);
    const auto combo = fs::path(ckpt) / "multigen-tvae-custom-seed3";
    REQUIRE(fs::exists(combo / "run-manifest.json"));

    // Rewind the checkpoint to "2 tasks completed" state by editing the
    // manifest back: simplest honest approach is to re-run with a checkpoint
    // hook stopping early; instead exercise resume on the final checkpoint
    // and compare reports.
    REQUIRE(run_cli({"run", "--resume", combo.string().c_str(), "--out",
                     resumed_out.c_str()}) == 0);
    CHECK(report_bytes_masked(fs::path(full_out) /
                              "run-multigen-tvae-custom-seed3.json") ==
          report_bytes_masked(fs::path(resumed_out) /
                              "run-multigen-tvae-custom-seed3.json"));
    fs::remove_all(dir);
}

TEST_CASE("mid-sequence resume continues bit-exactly") {
    // Drive run_method directly with a hook that snapshots after task 2,
    // then resume through the CLI path from that snapshot.
    const auto dir = fresh_dir("rf_cli_midresume");
    SequenceSpec spec;
    spec.ue_row = {2, 1, 2, 1};
    spec.p_row = {1, 1, 2, 2};
    spec.samples_per_task = 200;
    spec.seed = 3;
    HyperParams hp;
    hp.solver_epochs = 8;
    hp.gen_epochs = 8;
    hp.batch_size = 128;
    hp.max_modes = 3;
    hp.latent_dim = 4;
    hp.gen_hidden = {16};
    hp.solver_hidden = {32, 16};

    const auto combo = dir / "ckpt";
    RunHooks hooks;
    hooks.after_task = [&](std::size_t i, const MethodRun& run,
                           const Scholar* scholar, const Solver* solver) {
        if (i == 1)  // snapshot after the second task only
            cli::save_run_checkpoint(combo.string(), run, 2, scholar, solver);
    };
    auto reference = run_method(Method::MultiGenTVAE, spec, hp, 3, &hooks);

    auto resumed = cli::resume_run(combo.string());
    CHECK(resumed.result.entries == reference.result.entries);
    CHECK(resumed.summary.ave_mape == reference.summary.ave_mape);
    CHECK(resumed.storage_bytes == reference.storage_bytes);
    CHECK(resumed.tail.matrix.entries.size() ==
          reference.tail.matrix.entries.size());
    for (std::size_t i = 0; i < resumed.tail.matrix.entries.size(); ++i) {
        const double a = resumed.tail.matrix.entries[i];
        const double b = reference.tail.matrix.entries[i];
        CHECK(((std::isnan(a) && std::isnan(b)) || a == b));
    }
    fs::remove_all(dir);
}
