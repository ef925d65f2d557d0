#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "hetvar/regressors.hpp"

namespace hetvar {

namespace {

struct Standardized {
    std::vector<double> cols;   // column-major n*d, centered and scaled
    std::vector<double> mean;   // d
    std::vector<double> scale;  // d, population std; 1 for constant columns
    std::vector<double> yc;     // centered response
    double ymean = 0.0;
    std::vector<bool> active;   // false for constant columns
};

Standardized standardize(const Dataset& data) {
    const std::size_t n = data.rows, d = data.dim;
    Standardized s;
    s.mean.assign(d, 0.0);
    s.scale.assign(d, 1.0);
    s.active.assign(d, true);
    s.cols.assign(n * d, 0.0);

    for (std::size_t i = 0; i < n; ++i) {
        const auto r = data.row(i);
        for (std::size_t j = 0; j < d; ++j) s.mean[j] += r[j];
    }
    for (std::size_t j = 0; j < d; ++j) s.mean[j] /= static_cast<double>(n);

    std::vector<double> var(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = data.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            const double c = r[j] - s.mean[j];
            var[j] += c * c;
        }
    }
    for (std::size_t j = 0; j < d; ++j) {
        var[j] /= static_cast<double>(n);
        if (var[j] > 0.0) {
            s.scale[j] = std::sqrt(var[j]);
        } else {
            s.active[j] = false;  // constant column carries no signal
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = data.row(i);
        for (std::size_t j = 0; j < d; ++j)
            s.cols[j * n + i] = (r[j] - s.mean[j]) / s.scale[j];
    }

    s.ymean = 0.0;
    for (double v : data.y) s.ymean += v;
    s.ymean /= static_cast<double>(n);
    s.yc.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.yc[i] = data.y[i] - s.ymean;
    return s;
}

std::shared_ptr<const Regressor> to_raw_space(const std::string& kind, const Standardized& s,
                                              const std::vector<double>& beta) {
    const std::size_t d = s.mean.size();
    std::vector<double> w(d, 0.0);
    double b = s.ymean;
    for (std::size_t j = 0; j < d; ++j) {
        if (!s.active[j]) continue;
        w[j] = beta[j] / s.scale[j];
        b -= w[j] * s.mean[j];
    }
    return std::make_shared<LinearRegressor>(kind, std::move(w), b);
}

double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

// Cyclic coordinate descent for
//   (1/2n)||yc - Xs b||^2 + lambda*(alpha*||b||_1 + (1-alpha)/2*||b||^2)
// on standardized columns.
std::vector<double> coordinate_descent(const Standardized& s, std::size_t n, double lambda,
                                       double alpha, const char* what) {
    const std::size_t d = s.mean.size();
    std::vector<double> beta(d, 0.0);
    std::vector<double> resid = s.yc;
    std::vector<double> colnorm(d, 0.0);  // (1/n)||col_j||^2, ~1 after scaling
    for (std::size_t j = 0; j < d; ++j) {
        if (!s.active[j]) continue;
        const double* col = s.cols.data() + j * n;
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += col[i] * col[i];
        colnorm[j] = acc / static_cast<double>(n);
    }

    const double l1 = lambda * alpha;
    const double l2 = lambda * (1.0 - alpha);
    constexpr std::size_t max_sweeps = 10000;
    constexpr double tol = 1e-7;

    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double max_change = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            if (!s.active[j] || colnorm[j] == 0.0) continue;
            const double* col = s.cols.data() + j * n;
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot += col[i] * resid[i];
            const double rho = dot / static_cast<double>(n) + colnorm[j] * beta[j];
            const double bj = soft_threshold(rho, l1) / (colnorm[j] + l2);
            const double delta = bj - beta[j];
            if (delta != 0.0) {
                for (std::size_t i = 0; i < n; ++i) resid[i] -= delta * col[i];
                beta[j] = bj;
            }
            max_change = std::max(max_change, std::abs(delta));
        }
        if (max_change < tol) return beta;
    }

    std::ostringstream os;
    os << what << ": coordinate descent did not converge after " << max_sweeps
       << " sweeps (lambda=" << lambda << ", alpha=" << alpha << "); last iterate: [";
    for (std::size_t j = 0; j < d; ++j) os << (j ? "," : "") << beta[j];
    os << "]";
    throw std::runtime_error(os.str());
}

}  // namespace

LinearRegressor::LinearRegressor(std::string kind, std::vector<double> weights, double intercept)
    : kind_(std::move(kind)), weights_(std::move(weights)), intercept_(intercept) {}

double LinearRegressor::predict(std::span<const double> x) const {
    if (x.size() != weights_.size())
        throw std::invalid_argument(kind_ + " predict: dimension mismatch");
    double s = intercept_;
    for (std::size_t j = 0; j < x.size(); ++j) s += weights_[j] * x[j];
    return s;
}

std::string LinearRegressor::dump_json() const {
    std::ostringstream os;
    os << "{\"kind\":\"" << kind_ << "\",\"intercept\":" << intercept_ << ",\"weights\":[";
    for (std::size_t j = 0; j < weights_.size(); ++j) os << (j ? "," : "") << weights_[j];
    os << "]}";
    return os.str();
}

std::shared_ptr<const Regressor> fit_ridge(const Dataset& data, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("fit_ridge: lambda must be >= 0");
    data.validate();
    const std::size_t n = data.rows, d = data.dim;
    const Standardized s = standardize(data);

    // Normal equations on the (1/n)-scaled Gram: (G + lambda I) beta = c.
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d),
                                              static_cast<Eigen::Index>(d));
    Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    Eigen::Map<const Eigen::MatrixXd> X(s.cols.data(), static_cast<Eigen::Index>(n),
                                        static_cast<Eigen::Index>(d));
    Eigen::Map<const Eigen::VectorXd> yc(s.yc.data(), static_cast<Eigen::Index>(n));
    G = (X.transpose() * X) / static_cast<double>(n);
    c = (X.transpose() * yc) / static_cast<double>(n);
    G.diagonal().array() += lambda;

    Eigen::LDLT<Eigen::MatrixXd> solver(G);
    const Eigen::VectorXd diag = solver.vectorD().cwiseAbs();
    if (solver.info() != Eigen::Success ||
        diag.minCoeff() <= 1e-12 * std::max(1.0, diag.maxCoeff()))
        throw std::runtime_error("fit_ridge: singular system (lambda=0 with collinear features?)");
    Eigen::VectorXd beta = solver.solve(c);
    if (!beta.allFinite()) throw std::runtime_error("fit_ridge: numerically singular system");

    std::vector<double> bvec(beta.data(), beta.data() + d);
    return to_raw_space("ridge", s, bvec);
}

std::shared_ptr<const Regressor> fit_enet(const Dataset& data, double lambda, double alpha) {
    if (lambda < 0.0) throw std::invalid_argument("fit_enet: lambda must be >= 0");
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("fit_enet: alpha must be in [0,1]");
    data.validate();
    const Standardized s = standardize(data);
    const auto beta = coordinate_descent(s, data.rows, lambda, alpha, "fit_enet");
    return to_raw_space("enet", s, beta);
}

std::shared_ptr<const Regressor> fit_lasso(const Dataset& data, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("fit_lasso: lambda must be >= 0");
    data.validate();
    const Standardized s = standardize(data);
    const auto beta = coordinate_descent(s, data.rows, lambda, 1.0, "fit_lasso");
    return to_raw_space("lasso", s, beta);
}

}  // namespace hetvar
