#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hetvar/regressors.hpp"

namespace hetvar {

// Convex-combination coefficients on the simplex: w_j >= 0, sum w_j = 1.
struct SimplexWeights {
    std::vector<double> w;

    std::size_t size() const { return w.size(); }
    double operator[](std::size_t j) const { return w[j]; }
};

std::string weights_to_json(const SimplexWeights& weights);

// Mean squared deviation (1/N) sum (targets_i - preds_i)^2.
double empirical_risk(std::span<const double> preds, std::span<const double> targets);

// Index of the column with minimal empirical risk; ties -> lowest index.
std::size_t ms_select(const CandidateSet& cands);

// Euclidean projection onto the simplex (sort-and-threshold).
SimplexWeights project_simplex(std::span<const double> v);

struct ConvexFitResult {
    SimplexWeights weights;
    double objective = 0.0;      // (1/N)||targets - preds*w||^2 at the returned w
    std::size_t iterations = 0;
    // Per-iteration objective values when a trace sink is supplied.
};

// Minimizes the empirical risk of the convex combination over the simplex by
// projected gradient descent (uniform start, 1/L step from a Gershgorin bound
// on the quadratic's Hessian). The returned objective never exceeds the risk
// of any single candidate column. `trace`, when non-null, receives the
// objective after every iteration.
ConvexFitResult convex_weights(const CandidateSet& cands, std::vector<double>* trace = nullptr);

double predict_ms(const MachineList& machines, std::size_t idx, std::span<const double> x);
double predict_convex(const MachineList& machines, const SimplexWeights& weights,
                      std::span<const double> x);

}  // namespace hetvar
