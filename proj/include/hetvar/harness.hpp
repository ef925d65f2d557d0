#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hetvar/models.hpp"
#include "hetvar/regressors.hpp"

namespace hetvar {

enum class Method {
    MS,
    C,
    Best,
    Oracle,
    PluginTree,
    PluginRf,
    PluginMs,
    PluginC,
    PluginKnn,
};

std::string method_name(Method m);
std::optional<Method> method_from_name(const std::string& name);

struct ExperimentConfig {
    std::vector<ModelSpec> models;
    std::size_t n = 1000;
    std::size_t N = 1000;
    std::size_t calib_size = 100;  // |D_cal| for ECDF calibration
    std::size_t T = 1000;
    std::size_t reps = 20;  // desk-scale default; the full study uses 100
    std::vector<double> epsilons{0.0, 0.1, 0.3, 0.5, 0.7, 0.9};
    std::uint64_t seed = 20250810;
    std::vector<Method> methods;  // empty = per-run default
    std::string output_dir;       // empty = no files written
    std::size_t threads = 0;      // 0 = hardware concurrency
    std::size_t plugin_knn_k = 13;
    DictionaryConfig dictionary{};
};

// Parses a JSON mirror of ExperimentConfig. Unknown keys are errors.
ExperimentConfig config_from_json(const std::string& json_text);

struct MetricStats {
    double mean = 0.0;
    double stddev = 0.0;                // sample std over replications
    std::vector<double> raw;            // one value per replication
};

// Structural invariants accumulated over every pipeline fitted in a run.
struct RunDiagnostics {
    double min_variance_prediction = 0.0;  // min over all predict_variance outputs
    double max_ms_argmin_gap = 0.0;        // risk(selected) - min(risks), both stages
    double max_c_vertex_gap = 0.0;         // objective - min single-candidate risk
    std::size_t failed_reps = 0;
};

struct Table1Row {
    std::string model;
    std::string method;
    std::size_t n = 0, N = 0;
    MetricStats err;
};

struct RejectRow {
    std::string model;
    std::string method;
    double epsilon = 0.0;
    MetricStats err;
    MetricStats rate;
};

struct RunSummary {
    std::vector<Table1Row> table1;
    std::vector<RejectRow> reject;
    RunDiagnostics diag;
    std::string summary_csv;  // exact bytes written to the summary file
    std::string raw_csv;      // exact bytes written to the raw file
};

// Variance-estimation study: per replication draw D_n, D_N, D_T,
// fit the MS and C pipelines, run the best-candidate oracle on D_n u D_N, and
// record the empirical L2-errors. Methods default {MS, C, Best}.
RunSummary run_table1(const ExperimentConfig& cfg);

// Oracle epsilon-predictor study: per replication draw calibration
// features and a labeled test set; report Err and rejection rate per epsilon.
RunSummary run_oracle_reject(const ExperimentConfig& cfg);

// Plug-in epsilon-predictor study: methods default {tree, rf, C, MS}; tree
// and rf use the same single algorithm for both estimation stages.
RunSummary run_plugin_reject(const ExperimentConfig& cfg);

// CLI entry point (subcommands table1, oracle-reject, plugin-reject,
// gen-data). Returns 0 on success, 1 on configuration errors, 2 on runtime
// failures.
int cli_main(int argc, char** argv);

}  // namespace hetvar
