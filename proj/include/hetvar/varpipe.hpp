#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hetvar/aggregate.hpp"
#include "hetvar/models.hpp"
#include "hetvar/regressors.hpp"

namespace hetvar {

enum class AggregationMode { MS, C };

// The fitted two-stage variance estimator. Stage 1 aggregates a 12-machine
// dictionary for the regression function (fitted on D_n, selected on D_N);
// stage 2 refits the dictionary on D_n against squared residuals and
// aggregates again on D_N. Variance candidates are clipped at zero, so
// every prediction is nonnegative.
struct VariancePipeline {
    AggregationMode mode = AggregationMode::MS;

    MachineList f_machines;
    std::size_t f_index = 0;     // MS
    SimplexWeights f_weights;    // C
    std::vector<double> f_risks; // empirical risk of each candidate on D_N
    double f_objective = 0.0;    // risk of the aggregate on D_N

    MachineList var_machines;
    std::size_t var_index = 0;
    SimplexWeights var_weights;
    std::vector<double> var_risks;
    double var_objective = 0.0;

    double predict_f(std::span<const double> x) const;
    double predict_variance(std::span<const double> x) const;
    void predict_f_many(const Dataset& queries, std::span<double> out) const;
    void predict_variance_many(const Dataset& queries, std::span<double> out) const;

    // mode, selected index or weights for both stages, per-candidate risks.
    std::string summary_json() const;
};

// Runs the two-step procedure in order: (1) f-dictionary on dn; (2) f-selector
// on dN; (3) squared residuals on dn from the stage-1 aggregate; (4) variance
// dictionary on dn; (5) variance selector on dN.
VariancePipeline fit_variance(AggregationMode mode, const Dataset& dn, const Dataset& dN,
                              const DictionaryConfig& config, const Rng& rng);

// Fits the MS and C pipelines together, sharing the stage-1 dictionary fit.
// Identical to two fit_variance calls (the dictionary streams are keyed by
// (stage, machine), not by mode), just cheaper.
std::pair<VariancePipeline, VariancePipeline> fit_variance_both(const Dataset& dn,
                                                                const Dataset& dN,
                                                                const DictionaryConfig& config,
                                                                const Rng& rng);

// (1/T) sum (sigma2hat(X_i) - sigma2*(X_i))^2 over the test features.
double empirical_l2_error(const VariancePipeline& pipe, const ModelSpec& spec, const Dataset& dT);
double empirical_l2_error(const std::function<double(std::span<const double>)>& sigma2_hat,
                          const ModelSpec& spec, const Dataset& dT);

// The "Best" column of the simulation study: fit the 12-machine f-dictionary
// on d_all, then for every f-machine s fit 12 variance machines on d_all
// against its squared residuals, and return the (s, m) pair with minimal
// empirical L2-error on dT. errors is the full 12x12 grid (row s, col m).
struct BestCandidateResult {
    std::size_t f_index = 0;
    std::size_t var_index = 0;
    double error = 0.0;
    std::vector<double> errors;  // machine_count * machine_count, row-major
};

BestCandidateResult best_candidate_oracle(const Dataset& d_all, const ModelSpec& spec,
                                          const Dataset& dT, const DictionaryConfig& config,
                                          const Rng& rng);

}  // namespace hetvar
