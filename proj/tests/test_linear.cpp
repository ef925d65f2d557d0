#include <doctest.h>

#include <cmath>
#include <vector>

#include "hetvar/regressors.hpp"
#include "hetvar/rng.hpp"

using namespace hetvar;

namespace {

Dataset random_instance(Rng& rng, std::size_t n, std::size_t d, double noise) {
    Dataset data(n, d);
    std::vector<double> beta(d);
    for (double& b : beta) b = rng.uniform(-2.0, 2.0);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = data.row(i);
        double s = 0.5;
        for (std::size_t j = 0; j < d; ++j) {
            row[j] = rng.uniform();
            s += beta[j] * row[j];
        }
        data.y[i] = s + noise * rng.normal();
    }
    return data;
}

// Standardization mirror (center + population-std scale) used to state the
// KKT conditions in the fitted model's own coordinates.
struct Std {
    std::vector<double> mean, scale, beta;  // beta in standardized coords
    std::vector<std::vector<double>> cols;
    std::vector<double> yc;
};

Std standardized_view(const Dataset& data, const LinearRegressor& model) {
    const std::size_t n = data.rows, d = data.dim;
    Std s;
    s.mean.assign(d, 0.0);
    s.scale.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) s.mean[j] += data.row(i)[j];
    for (double& m : s.mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double c = data.row(i)[j] - s.mean[j];
            s.scale[j] += c * c;
        }
    for (double& v : s.scale) v = std::sqrt(v / static_cast<double>(n));

    s.cols.assign(d, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            s.cols[j][i] = (data.row(i)[j] - s.mean[j]) / s.scale[j];

    double ymean = 0.0;
    for (double v : data.y) ymean += v;
    ymean /= static_cast<double>(n);
    s.yc.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.yc[i] = data.y[i] - ymean;

    s.beta.resize(d);
    for (std::size_t j = 0; j < d; ++j) s.beta[j] = model.weights()[j] * s.scale[j];
    return s;
}

}  // namespace

TEST_CASE("ridge with lambda 0 interpolates exact linear data") {
    Dataset data(6, 1);
    for (std::size_t i = 0; i < 6; ++i) {
        data.x[i] = static_cast<double>(i);
        data.y[i] = 2.0 * static_cast<double>(i);
    }
    const auto model = fit_ridge(data, 0.0);
    const auto* lin = dynamic_cast<const LinearRegressor*>(model.get());
    REQUIRE(lin != nullptr);
    CHECK(lin->weights()[0] == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(lin->intercept() == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
}

TEST_CASE("huge lambda shrinks ridge to the mean predictor") {
    Rng rng(2);
    const Dataset data = random_instance(rng, 60, 3, 0.2);
    double mean = 0.0;
    for (double v : data.y) mean += v;
    mean /= static_cast<double>(data.rows);

    const auto model = fit_ridge(data, 1e9);
    const std::vector<double> q{0.3, 0.8, 0.1};
    CHECK(model->predict(q) == doctest::Approx(mean).epsilon(1e-3));
}

TEST_CASE("3-point ridge matches a hand 2x2 solve") {
    Dataset data(3, 2);
    data.x = {0.0, 1.0, 1.0, 0.0, 2.0, 2.0};
    data.y = {1.0, 2.0, 4.0};
    const double lambda = 1.0;

    const auto model = fit_ridge(data, lambda);
    const auto* lin = dynamic_cast<const LinearRegressor*>(model.get());
    REQUIRE(lin != nullptr);
    const Std s = standardized_view(data, *lin);

    // oracle: assemble (G + lambda I) beta = c with G = X'X/n and solve by
    // Cramer's rule
    const std::size_t n = 3;
    double g00 = 0, g01 = 0, g11 = 0, c0 = 0, c1 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        g00 += s.cols[0][i] * s.cols[0][i];
        g01 += s.cols[0][i] * s.cols[1][i];
        g11 += s.cols[1][i] * s.cols[1][i];
        c0 += s.cols[0][i] * s.yc[i];
        c1 += s.cols[1][i] * s.yc[i];
    }
    g00 = g00 / n + lambda;
    g11 = g11 / n + lambda;
    g01 /= n;
    c0 /= n;
    c1 /= n;
    const double det = g00 * g11 - g01 * g01;
    const double b0 = (c0 * g11 - c1 * g01) / det;
    const double b1 = (g00 * c1 - g01 * c0) / det;

    CHECK(s.beta[0] == doctest::Approx(b0).epsilon(1e-10));
    CHECK(s.beta[1] == doctest::Approx(b1).epsilon(1e-10));
}

TEST_CASE("lasso with lambda 0 recovers the least-squares fit") {
    Rng rng(3);
    const Dataset data = random_instance(rng, 80, 4, 0.1);
    const auto ols = fit_ridge(data, 0.0);
    const auto lasso = fit_lasso(data, 0.0);
    const auto* a = dynamic_cast<const LinearRegressor*>(ols.get());
    const auto* b = dynamic_cast<const LinearRegressor*>(lasso.get());
    for (std::size_t j = 0; j < 4; ++j)
        CHECK(b->weights()[j] == doctest::Approx(a->weights()[j]).epsilon(1e-5).scale(1.0));
    CHECK(b->intercept() == doctest::Approx(a->intercept()).epsilon(1e-5).scale(1.0));
}

TEST_CASE("lambda at the kill threshold zeroes every lasso coefficient") {
    Rng rng(4);
    const Dataset data = random_instance(rng, 50, 3, 0.3);
    const auto probe = fit_lasso(data, 1e9);  // any fit gives access to the view
    const Std s = standardized_view(data, *dynamic_cast<const LinearRegressor*>(probe.get()));
    double lmax = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
        double dot = 0.0;
        for (std::size_t i = 0; i < data.rows; ++i) dot += s.cols[j][i] * s.yc[i];
        lmax = std::max(lmax, std::abs(dot / static_cast<double>(data.rows)));
    }
    const auto model = fit_lasso(data, lmax * 1.0000001);
    const auto* lin = dynamic_cast<const LinearRegressor*>(model.get());
    for (double w : lin->weights()) CHECK(w == 0.0);
}

TEST_CASE("univariate lasso equals the soft-threshold closed form") {
    Rng rng(5);
    Dataset data = random_instance(rng, 40, 1, 0.2);
    for (const double lambda : {0.01, 0.05, 0.2, 1.0}) {
        const auto model = fit_lasso(data, lambda);
        const auto* lin = dynamic_cast<const LinearRegressor*>(model.get());
        const Std s = standardized_view(data, *lin);
        double rho = 0.0, norm = 0.0;
        for (std::size_t i = 0; i < data.rows; ++i) {
            rho += s.cols[0][i] * s.yc[i];
            norm += s.cols[0][i] * s.cols[0][i];
        }
        rho /= static_cast<double>(data.rows);
        norm /= static_cast<double>(data.rows);
        const double expected =
            (rho > lambda ? rho - lambda : rho < -lambda ? rho + lambda : 0.0) / norm;
        CHECK(s.beta[0] == doctest::Approx(expected).epsilon(1e-7).scale(1.0));
    }
}

TEST_CASE("lasso KKT conditions hold at the fit") {
    Rng rng(6);
    for (int inst = 0; inst < 10; ++inst) {
        const Dataset data = random_instance(rng, 60, 4, 0.4);
        const double lambda = 0.02 + 0.05 * inst;
        const auto model = fit_lasso(data, lambda);
        const auto* lin = dynamic_cast<const LinearRegressor*>(model.get());
        const Std s = standardized_view(data, *lin);

        std::vector<double> resid = s.yc;
        for (std::size_t j = 0; j < 4; ++j)
            for (std::size_t i = 0; i < data.rows; ++i) resid[i] -= s.cols[j][i] * s.beta[j];

        for (std::size_t j = 0; j < 4; ++j) {
            double grad = 0.0;
            for (std::size_t i = 0; i < data.rows; ++i) grad += s.cols[j][i] * resid[i];
            grad /= static_cast<double>(data.rows);
            if (s.beta[j] == 0.0) {
                CHECK(std::abs(grad) <= lambda + 1e-6);
            } else {
                CHECK(grad == doctest::Approx(lambda * (s.beta[j] > 0 ? 1.0 : -1.0))
                                  .epsilon(1e-6)
                                  .scale(1.0));
            }
        }
    }
}

TEST_CASE("enet(alpha=0) agrees with the ridge closed form") {
    Rng rng(7);
    for (int inst = 0; inst < 10; ++inst) {
        const Dataset data = random_instance(rng, 50, 3, 0.3);
        const double lambda = 0.1 + 0.3 * inst;
        const auto ridge_fit = fit_ridge(data, lambda);
        const auto enet_fit = fit_enet(data, lambda, 0.0);
        const auto* r = dynamic_cast<const LinearRegressor*>(ridge_fit.get());
        const auto* e = dynamic_cast<const LinearRegressor*>(enet_fit.get());
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(e->weights()[j] == doctest::Approx(r->weights()[j]).epsilon(1e-5).scale(1.0));
        CHECK(e->intercept() == doctest::Approx(r->intercept()).epsilon(1e-5).scale(1.0));
    }
}

TEST_CASE("invalid penalties are input errors") {
    Rng rng(8);
    const Dataset data = random_instance(rng, 20, 2, 0.1);
    CHECK_THROWS_AS(fit_ridge(data, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(fit_lasso(data, -0.5), std::invalid_argument);
    CHECK_THROWS_AS(fit_enet(data, 1.0, 1.5), std::invalid_argument);
}

TEST_CASE("ridge at lambda 0 fails loudly on collinear features") {
    Dataset data(4, 2);
    data.x = {1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 4.0, 8.0};  // second column = 2 * first
    data.y = {1.0, 2.0, 3.0, 4.0};
    CHECK_THROWS_AS(fit_ridge(data, 0.0), std::runtime_error);
}
