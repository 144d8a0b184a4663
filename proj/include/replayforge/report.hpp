// Run reports: one JSON document per run plus a plot-ready long-format CSV.
//
// Report JSON is fully determined by config and seeds except for the
// wall_time_seconds field.
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "replayforge/common.hpp"
#include "replayforge/evaluation.hpp"

#include "json.hpp"

namespace replayforge {

using ordered_json = nlohmann::ordered_json;

inline ordered_json matrix_to_json(const ResultMatrix& r) {
    ordered_json rows = ordered_json::array();
    for (std::size_t i = 0; i < r.tasks; ++i) {
        ordered_json row = ordered_json::array();
        for (std::size_t j = 0; j < r.tasks; ++j) {
            if (r.populated(i, j))
                row.push_back(r.at(i, j));
            else
                row.push_back(nullptr);
        }
        rows.push_back(row);
    }
    return rows;
}

inline ResultMatrix matrix_from_json(const nlohmann::json& rows) {
    ResultMatrix r(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.size() != rows.size()) throw ParseError("ragged result matrix");
        for (std::size_t j = 0; j < row.size(); ++j)
            if (!row[j].is_null()) r.at(i, j) = row[j].get<double>();
    }
    return r;
}

inline ordered_json hyperparams_to_json(const HyperParams& hp) {
    return {{"alpha", hp.alpha},
            {"solver_epochs", hp.solver_epochs},
            {"gen_epochs", hp.gen_epochs},
            {"batch_size", hp.batch_size},
            {"solver_lr", hp.solver_lr},
            {"gen_lr", hp.gen_lr},
            {"latent_dim", hp.latent_dim},
            {"gen_hidden", hp.gen_hidden},
            {"solver_hidden", hp.solver_hidden},
            {"max_modes", hp.max_modes},
            {"train_fraction", hp.train_fraction},
            {"tail_percentile", hp.tail_percentile},
            {"min_tail_count", hp.min_tail_count},
            {"warm_start", hp.warm_start}};
}

inline HyperParams hyperparams_from_json(const nlohmann::json& j) {
    HyperParams hp;
    hp.alpha = j.at("alpha").get<double>();
    hp.solver_epochs = j.at("solver_epochs").get<std::size_t>();
    hp.gen_epochs = j.at("gen_epochs").get<std::size_t>();
    hp.batch_size = j.at("batch_size").get<std::size_t>();
    hp.solver_lr = j.at("solver_lr").get<double>();
    hp.gen_lr = j.at("gen_lr").get<double>();
    hp.latent_dim = j.at("latent_dim").get<std::size_t>();
    hp.gen_hidden = j.at("gen_hidden").get<std::vector<std::size_t>>();
    hp.solver_hidden = j.at("solver_hidden").get<std::vector<std::size_t>>();
    hp.max_modes = j.at("max_modes").get<std::size_t>();
    hp.train_fraction = j.at("train_fraction").get<double>();
    hp.tail_percentile = j.at("tail_percentile").get<double>();
    hp.min_tail_count = j.at("min_tail_count").get<std::size_t>();
    hp.warm_start = j.at("warm_start").get<bool>();
    return hp;
}

inline ordered_json run_to_json(const MethodRun& run) {
    ordered_json doc;
    doc["schema"] = "replayforge-run-v1";
    doc["method"] = method_name(run.method);
    doc["case_id"] = run.sequence.case_id;
    if (run.sequence.case_id == 0) {
        doc["ue_row"] = run.sequence.ue_row;
        doc["p_row"] = run.sequence.p_row;
    }
    doc["seed"] = run.sequence.seed;
    doc["train_seed"] = run.train_seed;
    doc["samples_per_task"] = run.sequence.samples_per_task;
    doc["tasks"] = run.result.tasks;
    doc["hyperparams"] = hyperparams_to_json(run.hyperparams);
    doc["result_matrix"] = matrix_to_json(run.result);
    ordered_json fk = ordered_json::array();
    for (double v : run.summary.f_k) fk.push_back(v);
    doc["summary"] = {{"ave_mape", run.summary.ave_mape},
                      {"forgetting", run.summary.forgetting},
                      {"f_k", fk}};
    ordered_json tail;
    tail["threshold"] = run.tail.threshold;
    tail["min_tail_count"] = run.tail.min_count;
    tail["coverage"] = run.tail.coverage;
    tail["ave_mape"] =
        run.tail.ave_mape ? ordered_json(*run.tail.ave_mape) : ordered_json(nullptr);
    tail["forgetting"] = run.tail.forgetting ? ordered_json(*run.tail.forgetting)
                                             : ordered_json(nullptr);
    tail["matrix"] = matrix_to_json(run.tail.matrix);
    doc["tail"] = tail;
    doc["storage_bytes_per_task"] = run.storage_bytes;
    doc["wall_time_seconds"] = run.wall_time_seconds;
    return doc;
}

inline void write_report(const MethodRun& run, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << run_to_json(run).dump(2) << '\n';
}

// The subset of a report that cmd_report and the tests consume.
struct ReportDoc {
    std::string method;
    int case_id = 0;
    std::uint64_t seed = 0;
    std::size_t tasks = 0;
    double ave_mape = 0.0;
    double forgetting = 0.0;
    std::vector<double> f_k;
    double tail_coverage = 0.0;
    std::optional<double> tail_ave_mape;
    std::optional<double> tail_forgetting;
    ResultMatrix result;
    std::vector<std::size_t> storage_bytes;
};

inline ReportDoc read_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    try {
        ReportDoc r;
        r.method = doc.at("method").get<std::string>();
        r.case_id = doc.at("case_id").get<int>();
        r.seed = doc.at("seed").get<std::uint64_t>();
        r.tasks = doc.at("tasks").get<std::size_t>();
        r.ave_mape = doc.at("summary").at("ave_mape").get<double>();
        r.forgetting = doc.at("summary").at("forgetting").get<double>();
        r.f_k = doc.at("summary").at("f_k").get<std::vector<double>>();
        r.tail_coverage = doc.at("tail").at("coverage").get<double>();
        if (!doc.at("tail").at("ave_mape").is_null())
            r.tail_ave_mape = doc.at("tail").at("ave_mape").get<double>();
        if (!doc.at("tail").at("forgetting").is_null())
            r.tail_forgetting = doc.at("tail").at("forgetting").get<double>();
        r.result = matrix_from_json(doc.at("result_matrix"));
        r.storage_bytes =
            doc.at("storage_bytes_per_task").get<std::vector<std::size_t>>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

// Long-format CSV: method,case,seed,metric,k,value. Doubles print with %.17g
// so reruns are byte-identical.
inline void write_plot_csv(const std::vector<MethodRun>& runs,
                           const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "method,case,seed,metric,k,value\n";
    char buf[64];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (const auto& run : runs) {
        const std::string prefix = std::string(method_name(run.method)) + "," +
                                   std::to_string(run.sequence.case_id) + "," +
                                   std::to_string(run.sequence.seed) + ",";
        out << prefix << "ave_mape,," << fmt(run.summary.ave_mape) << '\n';
        out << prefix << "forgetting,," << fmt(run.summary.forgetting) << '\n';
        for (std::size_t k = 1; k <= run.summary.f_k.size(); ++k)
            out << prefix << "f_k," << k << ','
                << fmt(run.summary.f_k[k - 1]) << '\n';
        out << prefix << "tail_coverage,," << fmt(run.tail.coverage) << '\n';
        if (run.tail.ave_mape)
            out << prefix << "tail_ave_mape,," << fmt(*run.tail.ave_mape) << '\n';
        if (run.tail.forgetting)
            out << prefix << "tail_forgetting,," << fmt(*run.tail.forgetting)
                << '\n';
        out << prefix << "storage_bytes_final,,"
            << run.storage_bytes.back() << '\n';
    }
}

}  // namespace replayforge
