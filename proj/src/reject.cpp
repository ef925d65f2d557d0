#include <algorithm>
#include <stdexcept>

#include "hetvar/reject.hpp"

namespace hetvar {

EmpiricalCdf::EmpiricalCdf(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw std::invalid_argument("EmpiricalCdf: empty sample");
    std::sort(values_.begin(), values_.end());
}

double EmpiricalCdf::evaluate(double v) const {
    const auto it = std::upper_bound(values_.begin(), values_.end(), v);
    return static_cast<double>(it - values_.begin()) / static_cast<double>(values_.size());
}

EmpiricalCdf calibrate_cdf(const PredictionFn& sigma2_hat, const Dataset& calib_features,
                           double u, Rng& rng) {
    if (calib_features.rows < 1) throw std::invalid_argument("calibrate_cdf: empty sample");
    if (!(u > 0.0)) throw std::invalid_argument("calibrate_cdf: u must be > 0");
    std::vector<double> values(calib_features.rows);
    for (std::size_t i = 0; i < calib_features.rows; ++i)
        values[i] = sigma2_hat(calib_features.row(i)) + rng.uniform(0.0, u);
    return EmpiricalCdf(std::move(values));
}

RejectOutcome RejectPredictor::decide(std::span<const double> x, double epsilon) {
    if (epsilon < 0.0 || epsilon >= 1.0)
        throw std::invalid_argument("decide: epsilon must be in [0,1)");
    const double randomized = sigma2_hat(x) + rng.uniform(0.0, u);
    if (cdf.evaluate(randomized) <= 1.0 - epsilon) return {true, f_hat(x)};
    return {false, 0.0};
}

RejectPredictor oracle_predictor(const ModelSpec& spec, const Dataset& calib_features, double u,
                                 const Rng& rng) {
    // The oracle thresholds the true variance through an ECDF of raw (not
    // randomized) true values; the decide-time zeta is kept, matching the
    // plug-in rule, and is harmless since ties have probability zero.
    std::vector<double> values(calib_features.rows);
    for (std::size_t i = 0; i < calib_features.rows; ++i)
        values[i] = spec.sigma2_star(calib_features.row(i));
    RejectPredictor p{
        [spec](std::span<const double> x) { return spec.f_star(x); },
        [spec](std::span<const double> x) { return spec.sigma2_star(x); },
        EmpiricalCdf(std::move(values)),
        u,
        rng,
    };
    return p;
}

RejectEvaluation evaluate_reject(RejectPredictor& rule, const Dataset& dT, double epsilon) {
    if (dT.rows == 0) throw std::invalid_argument("evaluate_reject: empty test sample");
    RejectEvaluation ev;
    double err_sum = 0.0;
    for (std::size_t i = 0; i < dT.rows; ++i) {
        const RejectOutcome out = rule.decide(dT.row(i), epsilon);
        if (out.predicted) {
            const double d = dT.y[i] - out.value;
            err_sum += d * d;
            ++ev.accepted;
        }
    }
    ev.rate = 1.0 - static_cast<double>(ev.accepted) / static_cast<double>(dT.rows);
    if (ev.accepted == 0) {
        ev.degenerate = true;  // all rejected; err reported as 0 with the flag set
        ev.err = 0.0;
    } else {
        ev.err = err_sum / static_cast<double>(ev.accepted);
    }
    return ev;
}

}  // namespace hetvar
