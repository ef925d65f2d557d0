#pragma once

#include <functional>
#include <span>
#include <vector>

#include "hetvar/dataset.hpp"
#include "hetvar/models.hpp"
#include "hetvar/rng.hpp"

namespace hetvar {

// Empirical distribution function of a stored sample: evaluate(v) is the
// fraction of stored values <= v (right-continuous, 0 below the minimum,
// 1 at and above the maximum).
class EmpiricalCdf {
public:
    explicit EmpiricalCdf(std::vector<double> values);

    double evaluate(double v) const;
    std::size_t size() const { return values_.size(); }
    const std::vector<double>& values() const { return values_; }

private:
    std::vector<double> values_;  // sorted ascending
};

using PredictionFn = std::function<double(std::span<const double>)>;

// ECDF of the randomized variance values sigma2hat(X_i) + zeta_i with
// zeta_i ~ U[0,u]; the randomization makes stored values distinct a.s.
EmpiricalCdf calibrate_cdf(const PredictionFn& sigma2_hat, const Dataset& calib_features,
                           double u, Rng& rng);

struct RejectOutcome {
    bool predicted = false;
    double value = 0.0;  // meaningful only when predicted
};

// Plug-in epsilon-predictor: predicts f_hat(x) iff the randomized variance
// sigma2hat(x) + zeta falls at or below the 1-epsilon empirical quantile,
// otherwise abstains. zeta is drawn fresh per decide call.
struct RejectPredictor {
    PredictionFn f_hat;
    PredictionFn sigma2_hat;
    EmpiricalCdf cdf;
    double u = 1e-9;
    Rng rng;

    RejectOutcome decide(std::span<const double> x, double epsilon);
};

// The oracle rule: true f*, true sigma2, ECDF built from the raw true
// sigma2(X_i) values on the calibration features.
RejectPredictor oracle_predictor(const ModelSpec& spec, const Dataset& calib_features, double u,
                                 const Rng& rng);

struct RejectEvaluation {
    double err = 0.0;   // mean (Y - prediction)^2 over accepted points
    double rate = 0.0;  // fraction rejected
    std::size_t accepted = 0;
    bool degenerate = false;  // every point rejected; err reported as 0
};

// Applies the rule to every row of dT.
RejectEvaluation evaluate_reject(RejectPredictor& rule, const Dataset& dT, double epsilon);

}  // namespace hetvar
