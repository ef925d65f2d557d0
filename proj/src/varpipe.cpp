#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "hetvar/varpipe.hpp"

namespace hetvar {

namespace {

// Dictionary RNG streams are keyed by stage, then machine, so the MS and C
// pipelines fitted on the same data share identical dictionaries.
constexpr std::uint64_t STAGE_F = 0;
constexpr std::uint64_t STAGE_VAR = 1;

std::vector<double> clip_columns(CandidateSet& cands) {
    std::vector<double> risks(cands.cols);
    for (std::size_t m = 0; m < cands.cols; ++m) {
        auto col = cands.col(m);
        for (double& v : col) v = std::max(0.0, v);
        risks[m] = empirical_risk(col, cands.targets);
    }
    return risks;
}

struct Stage1 {
    MachineList machines;
    CandidateSet preds_dn;  // machine predictions on D_n (for residual targets)
    CandidateSet preds_dN;  // machine predictions on D_N, targets Y_N
    std::vector<double> risks;
};

Stage1 fit_stage1(const Dataset& dn, const Dataset& dN, const DictionaryConfig& config,
                  const Rng& rng) {
    Stage1 s1;
    s1.machines = build_dictionary(std::make_shared<Dataset>(dn), config, rng.split(STAGE_F));
    s1.preds_dn = predict_all(s1.machines, dn);
    s1.preds_dN = predict_all(s1.machines, dN);
    s1.preds_dN.targets = dN.y;
    s1.risks.resize(s1.preds_dN.cols);
    for (std::size_t m = 0; m < s1.preds_dN.cols; ++m)
        s1.risks[m] = empirical_risk(s1.preds_dN.col(m), dN.y);
    return s1;
}

VariancePipeline fit_stage2(AggregationMode mode, const Stage1& s1, const Dataset& dn,
                            const Dataset& dN, const DictionaryConfig& config, const Rng& rng) {
    VariancePipeline pipe;
    pipe.mode = mode;
    pipe.f_machines = s1.machines;
    pipe.f_risks = s1.risks;

    // stage-1 aggregate predictions on both samples
    std::vector<double> f_on_dn(dn.rows), f_on_dN(dN.rows);
    if (mode == AggregationMode::MS) {
        pipe.f_index = ms_select(s1.preds_dN);
        pipe.f_objective = s1.risks[pipe.f_index];
        std::copy_n(s1.preds_dn.col(pipe.f_index).data(), dn.rows, f_on_dn.data());
        std::copy_n(s1.preds_dN.col(pipe.f_index).data(), dN.rows, f_on_dN.data());
    } else {
        ConvexFitResult fit = convex_weights(s1.preds_dN);
        pipe.f_weights = std::move(fit.weights);
        pipe.f_objective = fit.objective;
        for (std::size_t i = 0; i < dn.rows; ++i) {
            double s = 0.0;
            for (std::size_t m = 0; m < s1.preds_dn.cols; ++m)
                s += pipe.f_weights[m] * s1.preds_dn.col(m)[i];
            f_on_dn[i] = s;
        }
        for (std::size_t i = 0; i < dN.rows; ++i) {
            double s = 0.0;
            for (std::size_t m = 0; m < s1.preds_dN.cols; ++m)
                s += pipe.f_weights[m] * s1.preds_dN.col(m)[i];
            f_on_dN[i] = s;
        }
    }

    // residual targets on D_n feed the variance dictionary
    auto var_data = std::make_shared<Dataset>(dn.rows, dn.dim);
    var_data->x = dn.x;
    for (std::size_t i = 0; i < dn.rows; ++i) {
        const double r = dn.y[i] - f_on_dn[i];
        var_data->y[i] = r * r;
    }
    try {
        pipe.var_machines = build_dictionary(var_data, config, rng.split(STAGE_VAR));
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("variance stage: ") + e.what());
    }

    // selector on D_N against residuals of the stage-1 aggregate there
    CandidateSet var_preds = predict_all(pipe.var_machines, dN);
    var_preds.targets.resize(dN.rows);
    for (std::size_t i = 0; i < dN.rows; ++i) {
        const double r = dN.y[i] - f_on_dN[i];
        var_preds.targets[i] = r * r;
    }
    pipe.var_risks = clip_columns(var_preds);

    if (mode == AggregationMode::MS) {
        pipe.var_index = ms_select(var_preds);
        pipe.var_objective = pipe.var_risks[pipe.var_index];
    } else {
        ConvexFitResult fit = convex_weights(var_preds);
        pipe.var_weights = std::move(fit.weights);
        pipe.var_objective = fit.objective;
    }
    return pipe;
}

}  // namespace

double VariancePipeline::predict_f(std::span<const double> x) const {
    if (mode == AggregationMode::MS) return predict_ms(f_machines, f_index, x);
    return predict_convex(f_machines, f_weights, x);
}

double VariancePipeline::predict_variance(std::span<const double> x) const {
    if (mode == AggregationMode::MS)
        return std::max(0.0, var_machines[var_index]->predict(x));
    double s = 0.0;
    for (std::size_t j = 0; j < var_machines.size(); ++j)
        s += var_weights[j] * std::max(0.0, var_machines[j]->predict(x));
    return s;
}

void VariancePipeline::predict_f_many(const Dataset& queries, std::span<double> out) const {
    if (mode == AggregationMode::MS) {
        f_machines[f_index]->predict_many(queries, out);
        return;
    }
    const CandidateSet preds = predict_all(f_machines, queries);
    for (std::size_t i = 0; i < queries.rows; ++i) {
        double s = 0.0;
        for (std::size_t m = 0; m < preds.cols; ++m) s += f_weights[m] * preds.col(m)[i];
        out[i] = s;
    }
}

void VariancePipeline::predict_variance_many(const Dataset& queries, std::span<double> out) const {
    if (mode == AggregationMode::MS) {
        var_machines[var_index]->predict_many(queries, out);
        for (double& v : out) v = std::max(0.0, v);
        return;
    }
    const CandidateSet preds = predict_all(var_machines, queries);
    for (std::size_t i = 0; i < queries.rows; ++i) {
        double s = 0.0;
        for (std::size_t m = 0; m < preds.cols; ++m)
            s += var_weights[m] * std::max(0.0, preds.col(m)[i]);
        out[i] = s;
    }
}

std::string VariancePipeline::summary_json() const {
    std::ostringstream os;
    auto risks = [&os](const std::vector<double>& r) {
        os << '[';
        for (std::size_t j = 0; j < r.size(); ++j) os << (j ? "," : "") << format_double(r[j]);
        os << ']';
    };
    os << "{\"mode\":\"" << (mode == AggregationMode::MS ? "MS" : "C") << "\",";
    os << "\"f\":{";
    if (mode == AggregationMode::MS)
        os << "\"selected\":" << f_index;
    else
        os << "\"weights\":" << weights_to_json(f_weights);
    os << ",\"objective\":" << format_double(f_objective) << ",\"risks\":";
    risks(f_risks);
    os << "},\"variance\":{";
    if (mode == AggregationMode::MS)
        os << "\"selected\":" << var_index;
    else
        os << "\"weights\":" << weights_to_json(var_weights);
    os << ",\"objective\":" << format_double(var_objective) << ",\"risks\":";
    risks(var_risks);
    os << "}}";
    return os.str();
}

VariancePipeline fit_variance(AggregationMode mode, const Dataset& dn, const Dataset& dN,
                              const DictionaryConfig& config, const Rng& rng) {
    if (dn.rows == 0 || dN.rows == 0) throw std::invalid_argument("fit_variance: empty sample");
    if (dn.dim != dN.dim) throw std::invalid_argument("fit_variance: dimension mismatch");
    Stage1 s1;
    try {
        s1 = fit_stage1(dn, dN, config, rng);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("regression stage: ") + e.what());
    }
    return fit_stage2(mode, s1, dn, dN, config, rng);
}

std::pair<VariancePipeline, VariancePipeline> fit_variance_both(const Dataset& dn,
                                                                const Dataset& dN,
                                                                const DictionaryConfig& config,
                                                                const Rng& rng) {
    if (dn.rows == 0 || dN.rows == 0) throw std::invalid_argument("fit_variance: empty sample");
    if (dn.dim != dN.dim) throw std::invalid_argument("fit_variance: dimension mismatch");
    Stage1 s1;
    try {
        s1 = fit_stage1(dn, dN, config, rng);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("regression stage: ") + e.what());
    }
    auto ms = fit_stage2(AggregationMode::MS, s1, dn, dN, config, rng);
    auto c = fit_stage2(AggregationMode::C, s1, dn, dN, config, rng);
    return {std::move(ms), std::move(c)};
}

double empirical_l2_error(const VariancePipeline& pipe, const ModelSpec& spec, const Dataset& dT) {
    if (dT.rows == 0) throw std::invalid_argument("empirical_l2_error: empty test sample");
    std::vector<double> pred(dT.rows);
    pipe.predict_variance_many(dT, pred);
    double s = 0.0;
    for (std::size_t i = 0; i < dT.rows; ++i) {
        const double d = pred[i] - spec.sigma2_star(dT.row(i));
        s += d * d;
    }
    return s / static_cast<double>(dT.rows);
}

double empirical_l2_error(const std::function<double(std::span<const double>)>& sigma2_hat,
                          const ModelSpec& spec, const Dataset& dT) {
    if (dT.rows == 0) throw std::invalid_argument("empirical_l2_error: empty test sample");
    double s = 0.0;
    for (std::size_t i = 0; i < dT.rows; ++i) {
        const auto row = dT.row(i);
        const double d = sigma2_hat(row) - spec.sigma2_star(row);
        s += d * d;
    }
    return s / static_cast<double>(dT.rows);
}

BestCandidateResult best_candidate_oracle(const Dataset& d_all, const ModelSpec& spec,
                                          const Dataset& dT, const DictionaryConfig& config,
                                          const Rng& rng) {
    constexpr std::size_t M = DictionaryConfig::machine_count;
    const MachineList f_machines =
        build_dictionary(std::make_shared<Dataset>(d_all), config, rng.split(STAGE_F));
    const CandidateSet f_preds = predict_all(f_machines, d_all);

    std::vector<double> sigma2_true(dT.rows);
    for (std::size_t i = 0; i < dT.rows; ++i) sigma2_true[i] = spec.sigma2_star(dT.row(i));

    // All variance-stage kNN machines share the training features, so one
    // neighbor search on dT serves every (s, k) pair.
    const std::size_t kmax = *std::max_element(config.knn_ks.begin(), config.knn_ks.end());
    const NeighborTable knn_table = build_neighbor_table(d_all, dT, kmax);

    BestCandidateResult result;
    result.errors.assign(M * M, 0.0);
    result.error = std::numeric_limits<double>::infinity();

    std::vector<double> pred(dT.rows);
    for (std::size_t s = 0; s < M; ++s) {
        auto var_data = std::make_shared<Dataset>(d_all.rows, d_all.dim);
        var_data->x = d_all.x;
        const auto fs = f_preds.col(s);
        for (std::size_t i = 0; i < d_all.rows; ++i) {
            const double r = d_all.y[i] - fs[i];
            var_data->y[i] = r * r;
        }
        MachineList var_machines;
        try {
            var_machines = build_dictionary(var_data, config, rng.split(STAGE_VAR).split(s));
        } catch (const std::exception& e) {
            throw std::runtime_error("best_candidate_oracle: f-machine " + std::to_string(s) +
                                     ": " + e.what());
        }

        for (std::size_t m = 0; m < M; ++m) {
            if (const auto* knn = dynamic_cast<const KnnRegressor*>(var_machines[m].get())) {
                for (std::size_t q = 0; q < dT.rows; ++q)
                    pred[q] = knn_mean_from_table(knn_table, q, knn->k(), var_data->y);
            } else {
                var_machines[m]->predict_many(dT, pred);
            }
            double err = 0.0;
            for (std::size_t q = 0; q < dT.rows; ++q) {
                const double d = std::max(0.0, pred[q]) - sigma2_true[q];
                err += d * d;
            }
            err /= static_cast<double>(dT.rows);
            result.errors[s * M + m] = err;
            if (err < result.error) {
                result.error = err;
                result.f_index = s;
                result.var_index = m;
            }
        }
    }
    return result;
}

}  // namespace hetvar
