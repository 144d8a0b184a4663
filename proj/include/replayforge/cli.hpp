// Command-line harness: run scenarios, export datasets, summarize reports.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage/config error. Progress
// goes to stderr; machine-readable data goes to files and stdout only.
#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "replayforge/common.hpp"
#include "replayforge/evaluation.hpp"
#include "replayforge/report.hpp"
#include "replayforge/scenario.hpp"

#include "CLI11.hpp"
#include "json.hpp"

namespace replayforge::cli {

namespace fs = std::filesystem;

struct RunConfig {
    int case_id = 0;
    std::vector<int> ue_row, p_row;
    std::vector<std::string> methods = {"naive", "cumulative", "singlegen-vae",
                                        "singlegen-tvae", "multigen-tvae"};
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::size_t samples_per_task = 2000;
    std::string out_dir = "runs";
    std::size_t jobs = 1;
    std::string checkpoint_dir;
    std::string resume_dir;
    HyperParams hp;

    void validate() const {
        if (case_id == 0 && ue_row.empty())
            throw UsageError("need --case or a scenario file with task rows");
        if (case_id != 0 && (case_id < 1 || case_id > 8))
            throw UsageError("--case must be 1..8");
        if (!ue_row.empty() && ue_row.size() != p_row.size())
            throw UsageError("ue_row and p_row must have equal length");
        if (methods.empty()) throw UsageError("method list is empty");
        if (seeds.empty()) throw UsageError("seed list is empty");
        for (const auto& m : methods) method_from_name(m);  // throws on unknown
    }
};

// ---- scenario file ------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(s);
    while (std::getline(ss, item, ',')) {
        // trim
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        out.push_back(b == std::string::npos ? "" : item.substr(b, e - b + 1));
    }
    return out;
}

template <typename T>
T parse_num(const std::string& v, const std::string& key) {
    try {
        if constexpr (std::is_floating_point_v<T>)
            return static_cast<T>(std::stod(v));
        else
            return static_cast<T>(std::stoull(v));
    } catch (const std::exception&) {
        throw UsageError("scenario file: bad value '" + v + "' for " + key);
    }
}

}  // namespace detail

// Flat `key = value` format, '#' comments.
inline void apply_scenario_file(const std::string& path, RunConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open scenario file " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos)
                throw UsageError(path + ":" + std::to_string(line_no) +
                                 ": expected `key = value`");
            continue;
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "case_id") {
            cfg.case_id = detail::parse_num<int>(value, key);
        } else if (key == "ue_row" || key == "p_row") {
            std::vector<int> row;
            for (const auto& item : detail::split_csv(value))
                row.push_back(detail::parse_num<int>(item, key));
            (key == "ue_row" ? cfg.ue_row : cfg.p_row) = row;
        } else if (key == "samples_per_task") {
            cfg.samples_per_task = detail::parse_num<std::size_t>(value, key);
        } else if (key == "seed") {
            cfg.seeds = {detail::parse_num<std::uint64_t>(value, key)};
        } else if (key == "seeds") {
            cfg.seeds.clear();
            for (const auto& item : detail::split_csv(value))
                cfg.seeds.push_back(detail::parse_num<std::uint64_t>(item, key));
        } else if (key == "alpha") {
            cfg.hp.alpha = detail::parse_num<double>(value, key);
        } else if (key == "methods") {
            cfg.methods = detail::split_csv(value);
        } else if (key == "tail_pct") {
            cfg.hp.tail_percentile = detail::parse_num<double>(value, key);
        } else if (key == "solver_epochs") {
            cfg.hp.solver_epochs = detail::parse_num<std::size_t>(value, key);
        } else if (key == "gen_epochs") {
            cfg.hp.gen_epochs = detail::parse_num<std::size_t>(value, key);
        } else if (key == "batch_size") {
            cfg.hp.batch_size = detail::parse_num<std::size_t>(value, key);
        } else if (key == "max_modes") {
            cfg.hp.max_modes = detail::parse_num<std::size_t>(value, key);
        } else if (key == "latent_dim") {
            cfg.hp.latent_dim = detail::parse_num<std::size_t>(value, key);
        } else if (key == "jobs") {
            cfg.jobs = detail::parse_num<std::size_t>(value, key);
        } else {
            throw UsageError(path + ":" + std::to_string(line_no) +
                             ": unknown key '" + key + "'");
        }
    }
}

// ---- run checkpointing ----------------------------------------------------------

inline std::string combo_tag(const std::string& method, int case_id,
                             std::uint64_t seed) {
    const std::string case_tag =
        case_id > 0 ? "case" + std::to_string(case_id) : "custom";
    return method + "-" + case_tag + "-seed" + std::to_string(seed);
}

inline void save_run_checkpoint(const std::string& dir, const MethodRun& run,
                                std::size_t completed_tasks,
                                const Scholar* scholar, const Solver* solver) {
    fs::create_directories(dir);
    ordered_json manifest;
    manifest["schema"] = "replayforge-run-checkpoint-v1";
    manifest["method"] = method_name(run.method);
    manifest["case_id"] = run.sequence.case_id;
    manifest["ue_row"] = run.sequence.ue_row;
    manifest["p_row"] = run.sequence.p_row;
    manifest["samples_per_task"] = run.sequence.samples_per_task;
    manifest["seed"] = run.sequence.seed;
    manifest["train_seed"] = run.train_seed;
    manifest["completed_tasks"] = completed_tasks;
    manifest["hyperparams"] = hyperparams_to_json(run.hyperparams);
    manifest["result_matrix"] = matrix_to_json(run.result);
    manifest["tail_matrix"] = matrix_to_json(run.tail.matrix);
    manifest["storage_bytes_per_task"] = run.storage_bytes;
    {
        std::ofstream out(fs::path(dir) / "run-manifest.json");
        if (!out) throw IoError("cannot write run manifest in " + dir);
        out << manifest.dump(2) << '\n';
    }
    if (scholar) save_scholar(*scholar, (fs::path(dir) / "scholar").string());
    if (solver)
        write_file((fs::path(dir) / "solver.bin").string(), solver->serialize());
}

// Resumes the (method, seed) run checkpointed in `dir` and returns the
// completed MethodRun.
inline MethodRun resume_run(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "run-manifest.json");
    if (!in) throw UsageError("no run-manifest.json in " + dir);
    nlohmann::json manifest = nlohmann::json::parse(in);

    const Method method =
        method_from_name(manifest.at("method").get<std::string>());
    SequenceSpec spec;
    spec.case_id = manifest.at("case_id").get<int>();
    spec.ue_row = manifest.at("ue_row").get<std::vector<int>>();
    spec.p_row = manifest.at("p_row").get<std::vector<int>>();
    spec.samples_per_task = manifest.at("samples_per_task").get<std::size_t>();
    spec.seed = manifest.at("seed").get<std::uint64_t>();
    const HyperParams hp = hyperparams_from_json(manifest.at("hyperparams"));
    const auto train_seed = manifest.at("train_seed").get<std::uint64_t>();

    RunHooks hooks;
    hooks.start_task = manifest.at("completed_tasks").get<std::size_t>();
    ResultMatrix result = matrix_from_json(manifest.at("result_matrix"));
    ResultMatrix tail = matrix_from_json(manifest.at("tail_matrix"));
    std::vector<std::size_t> storage =
        manifest.at("storage_bytes_per_task").get<std::vector<std::size_t>>();
    hooks.resume_result = &result;
    hooks.resume_tail_matrix = &tail;
    hooks.resume_storage = &storage;

    Scholar scholar;
    Solver solver;
    const bool generative = method == Method::SingleGenVAE ||
                            method == Method::SingleGenTVAE ||
                            method == Method::MultiGenTVAE;
    if (generative) {
        scholar = load_scholar((fs::path(dir) / "scholar").string(), owd_schema());
        scholar.solver_epochs = hp.solver_epochs;
        hooks.resume_scholar = &scholar;
    } else if (method == Method::Naive) {
        solver =
            Solver::deserialize(read_file((fs::path(dir) / "solver.bin").string()));
        hooks.resume_solver = &solver;
    }
    return run_method(method, spec, hp, train_seed, &hooks);
}

// ---- subcommands ------------------------------------------------------------------

inline int cmd_run(const RunConfig& cfg) {
    cfg.validate();
    fs::create_directories(cfg.out_dir);

    struct Job {
        Method method;
        std::uint64_t seed;
        std::string tag;
    };
    std::vector<Job> jobs;
    for (const auto& m : cfg.methods)
        for (auto seed : cfg.seeds)
            jobs.push_back({method_from_name(m), seed,
                            combo_tag(m, cfg.case_id, seed)});

    std::vector<std::optional<MethodRun>> results(jobs.size());
    std::vector<std::string> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;

    auto worker = [&]() {
        for (;;) {
            const std::size_t j = next.fetch_add(1);
            if (j >= jobs.size()) return;
            const Job& job = jobs[j];
            {
                std::lock_guard<std::mutex> lock(log_mutex);
                std::cerr << "[replayforge] running " << job.tag << "\n";
            }
            try {
                SequenceSpec spec;
                spec.case_id = cfg.case_id;
                spec.ue_row = cfg.ue_row;
                spec.p_row = cfg.p_row;
                spec.samples_per_task = cfg.samples_per_task;
                spec.seed = job.seed;

                RunHooks hooks;
                std::string combo_dir;
                if (!cfg.checkpoint_dir.empty()) {
                    combo_dir =
                        (fs::path(cfg.checkpoint_dir) / job.tag).string();
                    hooks.after_task = [&](std::size_t i, const MethodRun& run,
                                           const Scholar* scholar,
                                           const Solver* solver) {
                        save_run_checkpoint(combo_dir, run, i + 1, scholar,
                                            solver);
                    };
                }
                results[j] = run_method(job.method, spec, cfg.hp, job.seed,
                                        cfg.checkpoint_dir.empty() ? nullptr
                                                                   : &hooks);
            } catch (const std::exception& e) {
                errors[j] = e.what();
            }
        }
    };

    const std::size_t n_workers =
        std::max<std::size_t>(1, std::min(cfg.jobs, jobs.size()));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    bool failed = false;
    std::vector<MethodRun> completed;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        if (!errors[j].empty()) {
            std::cerr << "[replayforge] FAILED " << jobs[j].tag << ": "
                      << errors[j] << "\n";
            failed = true;
            continue;
        }
        const auto path =
            (fs::path(cfg.out_dir) / ("run-" + jobs[j].tag + ".json")).string();
        write_report(*results[j], path);
        completed.push_back(std::move(*results[j]));
    }
    if (!completed.empty())
        write_plot_csv(completed,
                       (fs::path(cfg.out_dir) / "comparison.csv").string());
    std::cerr << "[replayforge] wrote " << completed.size() << " report(s) to "
              << cfg.out_dir << "\n";
    return failed ? 1 : 0;
}

inline int cmd_export_data(int case_id, const std::string& out_dir,
                           std::uint64_t seed, std::size_t samples_per_task) {
    auto tasks = build_sequence(case_id, samples_per_task, seed);
    fs::create_directories(out_dir);
    save_schema(tasks.front().dataset.schema,
                (fs::path(out_dir) / "schema.txt").string());
    for (const auto& task : tasks) {
        std::ostringstream name;
        name << "case" << case_id << "_task";
        if (task.task_id < 10) name << '0';
        name << task.task_id << ".csv";
        save_csv(task.dataset, (fs::path(out_dir) / name.str()).string());
    }
    std::cerr << "[replayforge] exported " << tasks.size() << " task datasets to "
              << out_dir << "\n";
    return 0;
}

inline int cmd_report(const std::string& run_dir, const std::string& metric,
                      std::size_t k_filter, bool tail) {
    if (!fs::is_directory(run_dir)) {
        std::cerr << "error: " << run_dir << " is not a directory\n";
        return 1;
    }
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(run_dir)) {
        const auto name = entry.path().filename().string();
        if (name.rfind("run-", 0) == 0 && entry.path().extension() == ".json")
            paths.push_back(entry.path().string());
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) {
        std::cerr << "error: no run-*.json files in " << run_dir << "\n";
        return 1;
    }

    // Group by (method, case); aggregate mean and min-max band over seeds.
    struct Agg {
        std::vector<ReportDoc> docs;
    };
    std::map<std::pair<std::string, int>, Agg> groups;
    std::size_t tasks = 0;
    for (const auto& path : paths) {
        ReportDoc doc = read_report(path);
        tasks = std::max(tasks, doc.tasks);
        groups[{doc.method, doc.case_id}].docs.push_back(std::move(doc));
    }

    std::vector<std::size_t> ks;
    if (k_filter > 0) {
        ks = {k_filter};
    } else if (tasks >= 2) {
        // Reported k values: short- and long-term defaults per sequence length.
        ks = tasks == 18 ? std::vector<std::size_t>{6, 12}
                         : std::vector<std::size_t>{std::min<std::size_t>(4, tasks - 1),
                                                    std::min<std::size_t>(8, tasks - 1)};
    }

    auto band = [](const std::vector<double>& v) {
        double mean = 0.0, lo = v[0], hi = v[0];
        for (double x : v) {
            mean += x;
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        mean /= static_cast<double>(v.size());
        char buf[96];
        std::snprintf(buf, sizeof buf, "%8.3f [%7.3f,%7.3f]", mean, lo, hi);
        return std::string(buf);
    };

    std::cout << "method          case seeds";
    const bool want_ave = metric.empty() || metric == "ave_mape";
    const bool want_f = metric.empty() || metric == "forgetting" || metric == "f";
    const bool want_fk = metric.empty() || metric == "f_k";
    if (want_ave) std::cout << "  " << (tail ? "tail_AveMAPE" : "AveMAPE")
                            << " mean [min,max]          ";
    if (want_f) std::cout << (tail ? "tail_F" : "F") << " mean [min,max]            ";
    if (want_fk && !tail)
        for (auto k : ks) std::cout << "F_" << k << " mean [min,max]           ";
    if (tail) std::cout << "coverage";
    std::cout << "\n";

    for (const auto& [key, agg] : groups) {
        char head[64];
        std::snprintf(head, sizeof head, "%-15s %4d %5zu", key.first.c_str(),
                      key.second, agg.docs.size());
        std::cout << head;
        std::vector<double> ave, f, cov;
        std::map<std::size_t, std::vector<double>> fks;
        for (const auto& d : agg.docs) {
            if (tail) {
                if (d.tail_ave_mape) ave.push_back(*d.tail_ave_mape);
                if (d.tail_forgetting) f.push_back(*d.tail_forgetting);
                cov.push_back(d.tail_coverage);
            } else {
                ave.push_back(d.ave_mape);
                f.push_back(d.forgetting);
                for (auto k : ks)
                    if (k >= 1 && k <= d.f_k.size())
                        fks[k].push_back(d.f_k[k - 1]);
            }
        }
        if (want_ave) std::cout << "  " << (ave.empty() ? "       n/a" : band(ave));
        if (want_f) std::cout << "  " << (f.empty() ? "       n/a" : band(f));
        if (want_fk && !tail)
            for (auto k : ks)
                std::cout << "  "
                          << (fks[k].empty() ? "       n/a" : band(fks[k]));
        if (tail && !cov.empty()) {
            char buf[16];
            double mean = 0.0;
            for (double c : cov) mean += c;
            std::snprintf(buf, sizeof buf, "  %6.3f",
                          mean / static_cast<double>(cov.size()));
            std::cout << buf;
        }
        std::cout << "\n";
    }
    return 0;
}

// ---- entry point --------------------------------------------------------------------

inline int run_main(int argc, const char* const* argv) {
    CLI::App app{"replayforge: continual-learning benchmark for OWD prediction"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "run methods over a task sequence");
    RunConfig cfg;
    std::string scenario_file;
    std::string methods_csv, seeds_csv;
    run->add_option("--case", cfg.case_id, "benchmark case id (1..8)");
    run->add_option("--scenario", scenario_file, "scenario file (key = value)");
    run->add_option("--methods", methods_csv,
                    "comma-separated methods (default: all five)");
    run->add_option("--alpha", cfg.hp.alpha, "real-data mixing ratio");
    run->add_option("--seeds", seeds_csv, "comma-separated seeds (default 1..5)");
    run->add_option("--samples", cfg.samples_per_task, "samples per task");
    run->add_option("--out", cfg.out_dir, "output directory");
    run->add_option("--tail-pct", cfg.hp.tail_percentile,
                    "tail threshold percentile");
    run->add_option("--jobs", cfg.jobs, "parallel (method, seed) runs");
    run->add_option("--solver-epochs", cfg.hp.solver_epochs,
                    "solver epochs per task");
    run->add_option("--gen-epochs", cfg.hp.gen_epochs, "generator epochs per fit");
    run->add_option("--batch", cfg.hp.batch_size, "minibatch size");
    run->add_option("--max-modes", cfg.hp.max_modes,
                    "max GMM modes per continuous column");
    run->add_option("--latent", cfg.hp.latent_dim, "generator latent dimension");
    run->add_option("--checkpoint", cfg.checkpoint_dir,
                    "write per-task run checkpoints under this directory");
    run->add_option("--resume", cfg.resume_dir,
                    "resume a single (method, seed) run checkpoint directory");

    // export-data
    auto* exp = app.add_subcommand("export-data",
                                   "export synthetic task datasets as CSV");
    int exp_case = 1;
    std::string exp_out = "data";
    std::uint64_t exp_seed = 1;
    std::size_t exp_samples = 2000;
    exp->add_option("--case", exp_case, "benchmark case id (1..8)")->required();
    exp->add_option("--out", exp_out, "output directory");
    exp->add_option("--seed", exp_seed, "dataset seed");
    exp->add_option("--samples", exp_samples, "samples per task");

    // report
    auto* rep = app.add_subcommand("report", "summarize run reports");
    std::string rep_dir;
    std::string rep_metric;
    std::size_t rep_k = 0;
    bool rep_tail = false;
    rep->add_option("dir", rep_dir, "directory with run-*.json")->required();
    rep->add_option("--metric", rep_metric, "ave_mape | forgetting | f_k");
    rep->add_option("--k", rep_k, "k for --metric f_k");
    rep->add_flag("--tail", rep_tail, "tail metrics view");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (run->parsed()) {
            if (!scenario_file.empty()) apply_scenario_file(scenario_file, cfg);
            // Explicit flags override scenario-file values.
            if (run->count("--methods"))
                cfg.methods = detail::split_csv(methods_csv);
            if (run->count("--seeds")) {
                cfg.seeds.clear();
                for (const auto& s : detail::split_csv(seeds_csv))
                    cfg.seeds.push_back(
                        detail::parse_num<std::uint64_t>(s, "--seeds"));
            } else if (cfg.seeds.size() == 5 && cfg.seeds[0] == 1) {
                if (const char* env = std::getenv("REPLAYFORGE_SEED"))
                    cfg.seeds = {detail::parse_num<std::uint64_t>(
                        env, "REPLAYFORGE_SEED")};
            }
            if (!cfg.resume_dir.empty()) {
                MethodRun resumed = resume_run(cfg.resume_dir);
                fs::create_directories(cfg.out_dir);
                const auto tag = combo_tag(method_name(resumed.method),
                                           resumed.sequence.case_id,
                                           resumed.sequence.seed);
                write_report(resumed, (fs::path(cfg.out_dir) /
                                       ("run-" + tag + ".json"))
                                          .string());
                write_plot_csv({resumed}, (fs::path(cfg.out_dir) /
                                           "comparison.csv")
                                              .string());
                std::cerr << "[replayforge] resumed " << tag << "\n";
                return 0;
            }
            return cmd_run(cfg);
        }
        if (exp->parsed())
            return cmd_export_data(exp_case, exp_out, exp_seed, exp_samples);
        if (rep->parsed()) return cmd_report(rep_dir, rep_metric, rep_k, rep_tail);
        throw UsageError("no subcommand given");
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace replayforge::cli
