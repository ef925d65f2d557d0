#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "hetvar/harness.hpp"
#include "hetvar/reject.hpp"
#include "hetvar/varpipe.hpp"

namespace hetvar {

namespace {

constexpr double kRandomizationU = 1e-9;

// Per-replication RNG stream ids; keyed under (seed, model, rep) so results
// do not depend on thread count or model list order.
constexpr std::uint64_t DS_N = 1, DS_BIGN = 2, DS_T = 3, DS_CALIB = 4;
constexpr std::uint64_t FIT_PIPE = 5, FIT_BEST = 6, ORACLE_ZETA = 7;
constexpr std::uint64_t PLUGIN_FIT = 8, PLUGIN_CAL = 9, PLUGIN_ZETA = 10;

Rng rep_rng(std::uint64_t seed, const ModelSpec& spec, std::size_t rep) {
    return Rng(seed).split(static_cast<std::uint64_t>(spec.id) + 1).split(rep + 1);
}

void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& body) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, count == 0 ? std::size_t{1} : count);
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                body(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

MetricStats make_stats(std::vector<double> raw) {
    MetricStats s;
    s.raw = std::move(raw);
    const std::size_t n = s.raw.size();
    if (n == 0) return s;
    double sum = 0.0;
    for (double v : s.raw) sum += v;
    s.mean = sum / static_cast<double>(n);
    if (n > 1) {
        double ss = 0.0;
        for (double v : s.raw) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(n - 1));
    }
    return s;
}

std::string method_token(Method m) {
    switch (m) {
        case Method::MS: return "ms";
        case Method::C: return "c";
        case Method::Best: return "best";
        case Method::Oracle: return "oracle";
        case Method::PluginTree: return "tree";
        case Method::PluginRf: return "rf";
        case Method::PluginMs: return "ms";
        case Method::PluginC: return "c";
        case Method::PluginKnn: return "knn";
    }
    throw std::logic_error("method_token: bad method");
}

void write_output(const std::string& dir, const std::string& name, const std::string& bytes) {
    if (dir.empty()) return;
    std::filesystem::create_directories(dir);
    const std::string path = (std::filesystem::path(dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << bytes;
}

void merge_diag(RunDiagnostics& into, const RunDiagnostics& from) {
    into.min_variance_prediction =
        std::min(into.min_variance_prediction, from.min_variance_prediction);
    into.max_ms_argmin_gap = std::max(into.max_ms_argmin_gap, from.max_ms_argmin_gap);
    into.max_c_vertex_gap = std::max(into.max_c_vertex_gap, from.max_c_vertex_gap);
    into.failed_reps += from.failed_reps;
}

RunDiagnostics pipeline_diag(const VariancePipeline& pipe) {
    RunDiagnostics d;
    const double f_min = *std::min_element(pipe.f_risks.begin(), pipe.f_risks.end());
    const double v_min = *std::min_element(pipe.var_risks.begin(), pipe.var_risks.end());
    if (pipe.mode == AggregationMode::MS) {
        d.max_ms_argmin_gap = std::max(pipe.f_risks[pipe.f_index] - f_min,
                                       pipe.var_risks[pipe.var_index] - v_min);
    } else {
        d.max_c_vertex_gap = std::max(pipe.f_objective - f_min, pipe.var_objective - v_min);
    }
    return d;
}

// Mean squared deviation from the true variance plus the smallest prediction
// seen (for the nonnegativity diagnostic).
std::pair<double, double> variance_error_and_min(const VariancePipeline& pipe,
                                                 const ModelSpec& spec, const Dataset& dT) {
    std::vector<double> pred(dT.rows);
    pipe.predict_variance_many(dT, pred);
    double err = 0.0, lo = pred.empty() ? 0.0 : pred[0];
    for (std::size_t i = 0; i < dT.rows; ++i) {
        const double diff = pred[i] - spec.sigma2_star(dT.row(i));
        err += diff * diff;
        lo = std::min(lo, pred[i]);
    }
    return {err / static_cast<double>(dT.rows), lo};
}

RejectEvaluation evaluate_from_values(std::span<const double> f_vals,
                                      std::span<const double> sigma2_vals,
                                      std::span<const double> y, const EmpiricalCdf& cdf,
                                      double u, Rng& rng, double epsilon) {
    RejectEvaluation ev;
    double err_sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double randomized = sigma2_vals[i] + rng.uniform(0.0, u);
        if (cdf.evaluate(randomized) <= 1.0 - epsilon) {
            const double d = y[i] - f_vals[i];
            err_sum += d * d;
            ++ev.accepted;
        }
    }
    ev.rate = 1.0 - static_cast<double>(ev.accepted) / static_cast<double>(y.size());
    if (ev.accepted == 0) {
        ev.degenerate = true;
        ev.err = 0.0;
    } else {
        ev.err = err_sum / static_cast<double>(ev.accepted);
    }
    return ev;
}

std::vector<Method> effective_methods(const ExperimentConfig& cfg,
                                      std::initializer_list<Method> defaults,
                                      std::initializer_list<Method> allowed, const char* what) {
    std::vector<Method> ms = cfg.methods.empty() ? std::vector<Method>(defaults) : cfg.methods;
    for (const Method m : ms)
        if (std::find(allowed.begin(), allowed.end(), m) == allowed.end())
            throw std::invalid_argument(std::string(what) + ": method " + method_name(m) +
                                        " not supported here");
    return ms;
}

void require_models(const ExperimentConfig& cfg) {
    if (cfg.models.empty()) throw std::invalid_argument("no models configured");
    if (cfg.reps < 1 || cfg.T < 1 || cfg.n < 1 || cfg.N < 1 || cfg.calib_size < 1)
        throw std::invalid_argument("counts must be >= 1");
    for (const double e : cfg.epsilons)
        if (e < 0.0 || e >= 1.0) throw std::invalid_argument("epsilons must lie in [0,1)");
}

}  // namespace

std::string method_name(Method m) {
    switch (m) {
        case Method::MS: return "MS";
        case Method::C: return "C";
        case Method::Best: return "Best";
        case Method::Oracle: return "oracle";
        case Method::PluginTree: return "plugin-tree";
        case Method::PluginRf: return "plugin-rf";
        case Method::PluginMs: return "plugin-MS";
        case Method::PluginC: return "plugin-C";
        case Method::PluginKnn: return "plugin-knn";
    }
    throw std::logic_error("method_name: bad method");
}

std::optional<Method> method_from_name(const std::string& name) {
    for (const Method m : {Method::MS, Method::C, Method::Best, Method::Oracle,
                           Method::PluginTree, Method::PluginRf, Method::PluginMs,
                           Method::PluginC, Method::PluginKnn})
        if (method_name(m) == name) return m;
    return std::nullopt;
}

RunSummary run_table1(const ExperimentConfig& cfg) {
    require_models(cfg);
    const auto methods = effective_methods(cfg, {Method::C, Method::MS, Method::Best},
                                           {Method::C, Method::MS, Method::Best}, "table1");
    const bool want_c = std::find(methods.begin(), methods.end(), Method::C) != methods.end();
    const bool want_ms = std::find(methods.begin(), methods.end(), Method::MS) != methods.end();
    const bool want_best = std::find(methods.begin(), methods.end(), Method::Best) != methods.end();

    struct RepResult {
        bool failed = false;
        std::string error;
        double err_ms = 0.0, err_c = 0.0, err_best = 0.0;
        RunDiagnostics diag;
    };

    RunSummary summary;
    summary.diag.min_variance_prediction = std::numeric_limits<double>::infinity();
    std::ostringstream raw;
    raw << "model,n,N,rep";
    for (const Method m : methods) raw << ",err_" << method_token(m);
    raw << '\n';

    for (const ModelSpec& spec : cfg.models) {
        std::vector<RepResult> results(cfg.reps);
        parallel_for(cfg.reps, cfg.threads, [&](std::size_t rep) {
            RepResult& out = results[rep];
            out.diag.min_variance_prediction = std::numeric_limits<double>::infinity();
            try {
                const Rng base = rep_rng(cfg.seed, spec, rep);
                Rng gn = base.split(DS_N), gN = base.split(DS_BIGN), gT = base.split(DS_T);
                const Dataset dn = generate(spec, cfg.n, gn);
                const Dataset dN = generate(spec, cfg.N, gN);
                const Dataset dT = generate(spec, cfg.T, gT);

                if (want_c || want_ms) {
                    auto [ms, c] = fit_variance_both(dn, dN, cfg.dictionary, base.split(FIT_PIPE));
                    merge_diag(out.diag, pipeline_diag(ms));
                    merge_diag(out.diag, pipeline_diag(c));
                    if (want_ms) {
                        auto [err, lo] = variance_error_and_min(ms, spec, dT);
                        out.err_ms = err;
                        out.diag.min_variance_prediction =
                            std::min(out.diag.min_variance_prediction, lo);
                    }
                    if (want_c) {
                        auto [err, lo] = variance_error_and_min(c, spec, dT);
                        out.err_c = err;
                        out.diag.min_variance_prediction =
                            std::min(out.diag.min_variance_prediction, lo);
                    }
                }
                if (want_best) {
                    const BestCandidateResult best = best_candidate_oracle(
                        concat(dn, dN), spec, dT, cfg.dictionary, base.split(FIT_BEST));
                    out.err_best = best.error;
                }
            } catch (const std::exception& e) {
                out.failed = true;
                out.error = e.what();
            }
        });

        std::vector<double> v_ms, v_c, v_best;
        for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
            const RepResult& r = results[rep];
            if (r.failed) {
                ++summary.diag.failed_reps;
                continue;
            }
            merge_diag(summary.diag, r.diag);
            if (want_ms) v_ms.push_back(r.err_ms);
            if (want_c) v_c.push_back(r.err_c);
            if (want_best) v_best.push_back(r.err_best);
            raw << spec.name() << ',' << cfg.n << ',' << cfg.N << ',' << rep;
            for (const Method m : methods) {
                const double v = m == Method::C ? r.err_c : m == Method::MS ? r.err_ms : r.err_best;
                raw << ',' << format_double(v);
            }
            raw << '\n';
        }
        for (const Method m : methods) {
            Table1Row row;
            row.model = spec.name();
            row.method = method_token(m);
            row.n = cfg.n;
            row.N = cfg.N;
            row.err = make_stats(m == Method::C ? v_c : m == Method::MS ? v_ms : v_best);
            summary.table1.push_back(std::move(row));
        }
    }
    if (!std::isfinite(summary.diag.min_variance_prediction))
        summary.diag.min_variance_prediction = 0.0;

    std::ostringstream sum;
    sum << "model,method,n,N,err_mean,err_std\n";
    for (const Table1Row& row : summary.table1)
        sum << row.model << ',' << row.method << ',' << row.n << ',' << row.N << ','
            << format_double(row.err.mean) << ',' << format_double(row.err.stddev) << '\n';

    summary.summary_csv = sum.str();
    summary.raw_csv = raw.str();
    write_output(cfg.output_dir, "table1_summary.csv", summary.summary_csv);
    write_output(cfg.output_dir, "table1_raw.csv", summary.raw_csv);
    return summary;
}

RunSummary run_oracle_reject(const ExperimentConfig& cfg) {
    require_models(cfg);
    effective_methods(cfg, {Method::Oracle}, {Method::Oracle}, "oracle-reject");

    RunSummary summary;
    std::ostringstream raw;
    raw << "model,calib,T,rep,epsilon,err_oracle,rate_oracle\n";

    for (const ModelSpec& spec : cfg.models) {
        const std::size_t n_eps = cfg.epsilons.size();
        std::vector<std::vector<double>> errs(n_eps), rates(n_eps);
        struct RepRow {
            std::vector<double> err, rate;
        };
        std::vector<RepRow> rows(cfg.reps);
        parallel_for(cfg.reps, cfg.threads, [&](std::size_t rep) {
            const Rng base = rep_rng(cfg.seed, spec, rep);
            Rng gT = base.split(DS_T), gcal = base.split(DS_CALIB);
            const Dataset dT = generate(spec, cfg.T, gT);
            const Dataset calib = generate_features(spec, cfg.calib_size, gcal);
            RejectPredictor rule =
                oracle_predictor(spec, calib, kRandomizationU, base.split(ORACLE_ZETA));
            rows[rep].err.resize(n_eps);
            rows[rep].rate.resize(n_eps);
            for (std::size_t e = 0; e < n_eps; ++e) {
                const RejectEvaluation ev = evaluate_reject(rule, dT, cfg.epsilons[e]);
                rows[rep].err[e] = ev.err;
                rows[rep].rate[e] = ev.rate;
            }
        });
        for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
            for (std::size_t e = 0; e < n_eps; ++e) {
                errs[e].push_back(rows[rep].err[e]);
                rates[e].push_back(rows[rep].rate[e]);
                raw << spec.name() << ',' << cfg.calib_size << ',' << cfg.T << ',' << rep << ','
                    << format_double(cfg.epsilons[e]) << ',' << format_double(rows[rep].err[e])
                    << ',' << format_double(rows[rep].rate[e]) << '\n';
            }
        }
        for (std::size_t e = 0; e < n_eps; ++e) {
            RejectRow row;
            row.model = spec.name();
            row.method = "oracle";
            row.epsilon = cfg.epsilons[e];
            row.err = make_stats(std::move(errs[e]));
            row.rate = make_stats(std::move(rates[e]));
            summary.reject.push_back(std::move(row));
        }
    }

    std::ostringstream sum;
    sum << "model,method,epsilon,err_mean,err_std,rate_mean,rate_std\n";
    for (const RejectRow& row : summary.reject)
        sum << row.model << ',' << row.method << ',' << format_double(row.epsilon) << ','
            << format_double(row.err.mean) << ',' << format_double(row.err.stddev) << ','
            << format_double(row.rate.mean) << ',' << format_double(row.rate.stddev) << '\n';

    summary.summary_csv = sum.str();
    summary.raw_csv = raw.str();
    write_output(cfg.output_dir, "oracle_reject_summary.csv", summary.summary_csv);
    write_output(cfg.output_dir, "oracle_reject_raw.csv", summary.raw_csv);
    return summary;
}

RunSummary run_plugin_reject(const ExperimentConfig& cfg) {
    require_models(cfg);
    const auto methods = effective_methods(
        cfg, {Method::PluginTree, Method::PluginRf, Method::PluginC, Method::PluginMs},
        {Method::PluginTree, Method::PluginRf, Method::PluginC, Method::PluginMs,
         Method::PluginKnn},
        "plugin-reject");
    const std::size_t n_methods = methods.size();
    const std::size_t n_eps = cfg.epsilons.size();

    RunSummary summary;
    summary.diag.min_variance_prediction = std::numeric_limits<double>::infinity();
    std::ostringstream raw;
    raw << "model,n,N,calib,T,rep,epsilon";
    for (const Method m : methods)
        raw << ",err_" << method_token(m) << ",rate_" << method_token(m);
    raw << '\n';

    for (const ModelSpec& spec : cfg.models) {
        struct RepResult {
            bool failed = false;
            std::string error;
            // [method][epsilon]
            std::vector<std::vector<double>> err, rate;
            RunDiagnostics diag;
        };
        std::vector<RepResult> results(cfg.reps);

        parallel_for(cfg.reps, cfg.threads, [&](std::size_t rep) {
            RepResult& out = results[rep];
            out.err.assign(n_methods, std::vector<double>(n_eps, 0.0));
            out.rate.assign(n_methods, std::vector<double>(n_eps, 0.0));
            out.diag.min_variance_prediction = std::numeric_limits<double>::infinity();
            try {
                const Rng base = rep_rng(cfg.seed, spec, rep);
                Rng gn = base.split(DS_N), gN = base.split(DS_BIGN), gT = base.split(DS_T),
                    gcal = base.split(DS_CALIB);
                const Dataset dn = generate(spec, cfg.n, gn);
                const Dataset dN = generate(spec, cfg.N, gN);
                const Dataset dT = generate(spec, cfg.T, gT);
                const Dataset calib = generate_features(spec, cfg.calib_size, gcal);

                const bool want_agg =
                    std::find(methods.begin(), methods.end(), Method::PluginC) != methods.end() ||
                    std::find(methods.begin(), methods.end(), Method::PluginMs) != methods.end();
                VariancePipeline ms_pipe, c_pipe;
                if (want_agg) {
                    auto pair = fit_variance_both(dn, dN, cfg.dictionary, base.split(FIT_PIPE));
                    ms_pipe = std::move(pair.first);
                    c_pipe = std::move(pair.second);
                    merge_diag(out.diag, pipeline_diag(ms_pipe));
                    merge_diag(out.diag, pipeline_diag(c_pipe));
                }

                // Single-algorithm plug-ins: the same learner estimates f on
                // D_n and then the variance on D_n against its own squared
                // residuals.
                const Rng plugin_rng = base.split(PLUGIN_FIT);
                auto residual_data = [&](const Regressor& f_hat) {
                    auto vd = std::make_shared<Dataset>(dn.rows, dn.dim);
                    vd->x = dn.x;
                    for (std::size_t i = 0; i < dn.rows; ++i) {
                        const double r = dn.y[i] - f_hat.predict(dn.row(i));
                        vd->y[i] = r * r;
                    }
                    return vd;
                };

                for (std::size_t mi = 0; mi < n_methods; ++mi) {
                    const Method method = methods[mi];
                    // streams keyed by the method itself, not its position,
                    // so per-method results survive reordering of the list
                    const auto mkey = static_cast<std::uint64_t>(method);
                    std::vector<double> f_vals(dT.rows), s2_cal(calib.rows), s2_T(dT.rows);

                    auto fill_single = [&](const std::shared_ptr<const Regressor>& f_hat,
                                           const std::shared_ptr<const Regressor>& v_hat) {
                        f_hat->predict_many(dT, f_vals);
                        v_hat->predict_many(calib, s2_cal);
                        v_hat->predict_many(dT, s2_T);
                        for (double& v : s2_cal) v = std::max(0.0, v);
                        for (double& v : s2_T) v = std::max(0.0, v);
                    };

                    switch (method) {
                        case Method::PluginTree: {
                            const auto f_hat = fit_tree(dn, cfg.dictionary.tree_params);
                            const auto v_hat =
                                fit_tree(*residual_data(*f_hat), cfg.dictionary.tree_params);
                            fill_single(f_hat, v_hat);
                            break;
                        }
                        case Method::PluginRf: {
                            const Rng rf_rng = plugin_rng.split(mkey);
                            const auto f_hat = fit_forest(dn, 500, rf_rng.split(0));
                            const auto v_hat =
                                fit_forest(*residual_data(*f_hat), 500, rf_rng.split(1));
                            fill_single(f_hat, v_hat);
                            break;
                        }
                        case Method::PluginKnn: {
                            const auto f_hat = fit_knn(dn, cfg.plugin_knn_k);
                            const auto v_hat =
                                fit_knn(*residual_data(*f_hat), cfg.plugin_knn_k);
                            fill_single(f_hat, v_hat);
                            break;
                        }
                        case Method::PluginMs:
                        case Method::PluginC: {
                            const VariancePipeline& pipe =
                                method == Method::PluginMs ? ms_pipe : c_pipe;
                            pipe.predict_f_many(dT, f_vals);
                            pipe.predict_variance_many(calib, s2_cal);
                            pipe.predict_variance_many(dT, s2_T);
                            break;
                        }
                        default:
                            throw std::logic_error("plugin-reject: unexpected method");
                    }

                    for (const double v : s2_T)
                        out.diag.min_variance_prediction =
                            std::min(out.diag.min_variance_prediction, v);

                    Rng cal_rng = base.split(PLUGIN_CAL).split(mkey);
                    std::vector<double> randomized(s2_cal.size());
                    for (std::size_t i = 0; i < s2_cal.size(); ++i)
                        randomized[i] = s2_cal[i] + cal_rng.uniform(0.0, kRandomizationU);
                    const EmpiricalCdf cdf(std::move(randomized));

                    Rng zeta_rng = base.split(PLUGIN_ZETA).split(mkey);
                    for (std::size_t e = 0; e < n_eps; ++e) {
                        const RejectEvaluation ev =
                            evaluate_from_values(f_vals, s2_T, dT.y, cdf, kRandomizationU,
                                                 zeta_rng, cfg.epsilons[e]);
                        out.err[mi][e] = ev.err;
                        out.rate[mi][e] = ev.rate;
                    }
                }
            } catch (const std::exception& e) {
                out.failed = true;
                out.error = e.what();
            }
        });

        // [method][epsilon] -> raw values over reps
        std::vector<std::vector<std::vector<double>>> errs(n_methods), rates(n_methods);
        for (std::size_t mi = 0; mi < n_methods; ++mi) {
            errs[mi].resize(n_eps);
            rates[mi].resize(n_eps);
        }
        for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
            const RepResult& r = results[rep];
            if (r.failed) {
                ++summary.diag.failed_reps;
                continue;
            }
            merge_diag(summary.diag, r.diag);
            for (std::size_t e = 0; e < n_eps; ++e) {
                raw << spec.name() << ',' << cfg.n << ',' << cfg.N << ',' << cfg.calib_size << ','
                    << cfg.T << ',' << rep << ',' << format_double(cfg.epsilons[e]);
                for (std::size_t mi = 0; mi < n_methods; ++mi) {
                    raw << ',' << format_double(r.err[mi][e]) << ','
                        << format_double(r.rate[mi][e]);
                    errs[mi][e].push_back(r.err[mi][e]);
                    rates[mi][e].push_back(r.rate[mi][e]);
                }
                raw << '\n';
            }
        }
        for (std::size_t mi = 0; mi < n_methods; ++mi) {
            for (std::size_t e = 0; e < n_eps; ++e) {
                RejectRow row;
                row.model = spec.name();
                row.method = method_token(methods[mi]);
                row.epsilon = cfg.epsilons[e];
                row.err = make_stats(std::move(errs[mi][e]));
                row.rate = make_stats(std::move(rates[mi][e]));
                summary.reject.push_back(std::move(row));
            }
        }
    }
    if (!std::isfinite(summary.diag.min_variance_prediction))
        summary.diag.min_variance_prediction = 0.0;

    std::ostringstream sum;
    sum << "model,method,epsilon,err_mean,err_std,rate_mean,rate_std\n";
    for (const RejectRow& row : summary.reject)
        sum << row.model << ',' << row.method << ',' << format_double(row.epsilon) << ','
            << format_double(row.err.mean) << ',' << format_double(row.err.stddev) << ','
            << format_double(row.rate.mean) << ',' << format_double(row.rate.stddev) << '\n';

    summary.summary_csv = sum.str();
    summary.raw_csv = raw.str();
    write_output(cfg.output_dir, "plugin_reject_summary.csv", summary.summary_csv);
    write_output(cfg.output_dir, "plugin_reject_raw.csv", summary.raw_csv);
    return summary;
}

}  // namespace hetvar
