#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hetvar/harness.hpp"
#include "hetvar/models.hpp"
#include "hetvar/reject.hpp"

namespace hetvar {

namespace {

struct CliOptions {
    std::string config_path;
    std::vector<std::string> models;
    std::vector<std::string> methods;
    std::string epsilons;
    std::string out_dir;
    std::int64_t n = -1, N = -1, T = -1, reps = -1, calib = -1, threads = -1, knn_k = -1;
    std::int64_t seed = -1;
    bool seed_set = false;
};

std::vector<double> parse_epsilons(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument("bad epsilon '" + tok + "'");
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument("empty epsilon list");
    return out;
}

ExperimentConfig build_config(const CliOptions& opt) {
    ExperimentConfig cfg;
    bool seed_from_config = false;
    if (!opt.config_path.empty()) {
        std::ifstream in(opt.config_path);
        if (!in) throw std::invalid_argument("cannot open config file: " + opt.config_path);
        std::ostringstream ss;
        ss << in.rdbuf();
        cfg = config_from_json(ss.str());
        seed_from_config = ss.str().find("\"seed\"") != std::string::npos;
    }

    if (!opt.models.empty()) {
        cfg.models.clear();
        for (const auto& name : opt.models) {
            const auto spec = ModelSpec::from_name(name);
            if (!spec)
                throw std::invalid_argument("unknown model '" + name +
                                            "'; valid: " + ModelSpec::valid_names());
            cfg.models.push_back(*spec);
        }
    }
    if (!opt.methods.empty()) {
        cfg.methods.clear();
        for (const auto& name : opt.methods) {
            const auto m = method_from_name(name);
            if (!m) throw std::invalid_argument("unknown method '" + name + "'");
            cfg.methods.push_back(*m);
        }
    }
    if (opt.n >= 0) cfg.n = static_cast<std::size_t>(opt.n);
    if (opt.N >= 0) cfg.N = static_cast<std::size_t>(opt.N);
    if (opt.T >= 0) cfg.T = static_cast<std::size_t>(opt.T);
    if (opt.calib >= 0) cfg.calib_size = static_cast<std::size_t>(opt.calib);
    if (opt.reps >= 0) cfg.reps = static_cast<std::size_t>(opt.reps);
    if (!opt.epsilons.empty()) cfg.epsilons = parse_epsilons(opt.epsilons);
    if (!opt.out_dir.empty()) cfg.output_dir = opt.out_dir;
    if (opt.threads >= 0) cfg.threads = static_cast<std::size_t>(opt.threads);
    if (opt.knn_k > 0) cfg.plugin_knn_k = static_cast<std::size_t>(opt.knn_k);

    if (opt.seed_set) {
        cfg.seed = static_cast<std::uint64_t>(opt.seed);
    } else if (!seed_from_config) {
        if (const char* env = std::getenv("HETVAR_SEED")) {
            cfg.seed = static_cast<std::uint64_t>(std::strtoull(env, nullptr, 10));
        }
    }
    if (cfg.models.empty())
        throw std::invalid_argument("no model given (use --model; valid: " +
                                    std::string(ModelSpec::valid_names()) + ")");
    return cfg;
}

void print_summary(const RunSummary& summary) { std::cout << summary.summary_csv; }

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"Conditional variance estimation by MS/C aggregation, with reject option"};
    app.require_subcommand(1);

    CliOptions opt;

    auto* table1 = app.add_subcommand("table1", "variance-estimation study (MS, C, Best)");
    auto* oracle = app.add_subcommand("oracle-reject", "oracle epsilon-predictor study");
    auto* plugin = app.add_subcommand("plugin-reject", "plug-in epsilon-predictor study");
    auto* gen = app.add_subcommand("gen-data", "write one synthetic dataset as CSV");

    for (CLI::App* cmd : {table1, oracle, plugin}) {
        cmd->add_option("--config", opt.config_path, "JSON config file (flags override it)");
        cmd->add_option("--model", opt.models, "model name(s)")->delimiter(',');
        cmd->add_option("--methods", opt.methods, "method subset")->delimiter(',');
        cmd->add_option("--n", opt.n, "size of D_n");
        cmd->add_option("--N", opt.N, "size of D_N");
        cmd->add_option("--T", opt.T, "test-sample size");
        cmd->add_option("--calib", opt.calib, "calibration-sample size");
        cmd->add_option("--reps", opt.reps, "number of replications");
        cmd->add_option("--epsilons", opt.epsilons,
                        "comma-separated rejection rates in [0,1)");
        cmd->add_option("--out", opt.out_dir, "output directory for CSV files");
        cmd->add_option("--threads", opt.threads, "worker threads (0 = hardware)");
        cmd->add_option("--plugin-knn-k", opt.knn_k, "k for the knn plug-in");
        cmd->add_option("--seed", opt.seed, "RNG seed")->each([&opt](const std::string&) {
            opt.seed_set = true;
        });
    }

    std::string gen_model, gen_out = "data.csv";
    std::int64_t gen_n = 1000, gen_seed = -1;
    bool gen_noiseless = false;
    bool gen_seed_set = false;
    gen->add_option("--model", gen_model, "model name")->required();
    gen->add_option("--n", gen_n, "rows to draw");
    gen->add_option("--out", gen_out, "output CSV path");
    gen->add_flag("--noiseless", gen_noiseless, "zero-noise diagnostic draw");
    gen->add_option("--seed", gen_seed, "RNG seed")->each([&gen_seed_set](const std::string&) {
        gen_seed_set = true;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) {
            const auto spec = ModelSpec::from_name(gen_model);
            if (!spec) {
                std::cerr << "unknown model '" << gen_model
                          << "'; valid: " << ModelSpec::valid_names() << "\n";
                return 1;
            }
            std::uint64_t seed = 20250810;
            if (gen_seed_set) {
                seed = static_cast<std::uint64_t>(gen_seed);
            } else if (const char* env = std::getenv("HETVAR_SEED")) {
                seed = static_cast<std::uint64_t>(std::strtoull(env, nullptr, 10));
            }
            Rng rng(seed);
            Rng stream = rng.split(1);
            const Dataset data = gen_noiseless
                                     ? generate_noiseless(*spec, static_cast<std::size_t>(gen_n),
                                                          stream)
                                     : generate(*spec, static_cast<std::size_t>(gen_n), stream);
            write_csv_file(data, gen_out);
            std::cout << "wrote " << data.rows << " rows to " << gen_out << "\n";
            return 0;
        }

        ExperimentConfig cfg;
        try {
            cfg = build_config(opt);
        } catch (const std::invalid_argument& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return 1;
        }

        RunSummary summary;
        try {
            if (table1->parsed())
                summary = run_table1(cfg);
            else if (oracle->parsed())
                summary = run_oracle_reject(cfg);
            else
                summary = run_plugin_reject(cfg);
        } catch (const std::invalid_argument& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return 1;
        }
        print_summary(summary);
        if (summary.diag.failed_reps > 0) {
            std::cerr << summary.diag.failed_reps << " replication(s) failed\n";
            return 2;
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace hetvar
