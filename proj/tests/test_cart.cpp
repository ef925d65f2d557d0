#include <doctest.h>

#include <vector>

#include "hetvar/regressors.hpp"
#include "hetvar/rng.hpp"

using namespace hetvar;

namespace {

Dataset synth_data(Rng& rng, std::size_t n, std::size_t d) {
    Dataset data(n, d);
    for (double& v : data.x) v = rng.uniform();
    for (std::size_t i = 0; i < n; ++i)
        data.y[i] = data.row(i)[0] * 2.0 + 0.3 * rng.normal();
    return data;
}

}  // namespace

TEST_CASE("constant response yields a single leaf") {
    Dataset data(20, 2);
    Rng rng(1);
    for (double& v : data.x) v = rng.uniform();
    for (double& v : data.y) v = 0.7;
    const auto model = fit_tree(data, TreeParams{30, 1, 2});
    const auto* tree = dynamic_cast<const TreeRegressor*>(model.get());
    REQUIRE(tree != nullptr);
    CHECK(tree->nodes().size() == 1);
    const std::vector<double> q{0.5, 0.5};
    CHECK(model->predict(q) == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("step data splits at the midpoint 1.5") {
    // thresholds 0.5 / 1.5 / 2.5; variance reduction is maximal at 1.5
    Dataset data(4, 1);
    data.x = {0.0, 1.0, 2.0, 3.0};
    data.y = {0.0, 0.0, 1.0, 1.0};
    const auto model = fit_tree(data, TreeParams{30, 1, 2});
    const auto* tree = dynamic_cast<const TreeRegressor*>(model.get());
    REQUIRE(tree != nullptr);
    const TreeNode& root = tree->nodes()[0];
    CHECK(root.feature == 0);
    CHECK(root.threshold == doctest::Approx(1.5).epsilon(1e-12));
    const std::vector<double> lo{1.0}, hi{2.0};
    CHECK(model->predict(lo) == 0.0);
    CHECK(model->predict(hi) == 1.0);
}

TEST_CASE("max_depth 0 predicts the global mean") {
    Rng rng(2);
    const Dataset data = synth_data(rng, 50, 2);
    double mean = 0.0;
    for (double v : data.y) mean += v;
    mean /= static_cast<double>(data.rows);
    const auto model = fit_tree(data, TreeParams{0, 1, 2});
    const std::vector<double> q{0.5, 0.5};
    CHECK(model->predict(q) == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("tie-breaking prefers the lowest feature index") {
    // identical split structure available on both features
    Dataset data(4, 2);
    data.x = {0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0};
    data.y = {0.0, 0.0, 1.0, 1.0};
    const auto model = fit_tree(data, TreeParams{30, 1, 2});
    const auto* tree = dynamic_cast<const TreeRegressor*>(model.get());
    CHECK(tree->nodes()[0].feature == 0);
}

TEST_CASE("degenerate ensemble equals the plain tree") {
    Rng rng(3);
    const Dataset data = synth_data(rng, 120, 3);
    ForestParams p;
    p.ntree = 1;
    p.bootstrap = false;
    p.mtry = 3;
    p.min_leaf = 5;
    const auto forest = fit_forest(data, p, Rng(99));
    const auto tree = fit_tree(data, TreeParams{30, 5, 10});
    Rng qr(4);
    std::vector<double> q(3);
    for (int i = 0; i < 200; ++i) {
        for (double& v : q) v = qr.uniform();
        CHECK(forest->predict(q) == tree->predict(q));
    }
}

TEST_CASE("forest on constant response predicts that constant") {
    Dataset data(30, 2);
    Rng rng(5);
    for (double& v : data.x) v = rng.uniform();
    for (double& v : data.y) v = -1.25;
    const auto forest = fit_forest(data, 20, Rng(7));
    const std::vector<double> q{0.4, 0.9};
    CHECK(forest->predict(q) == -1.25);
}

TEST_CASE("forest refit with the same seed is bitwise identical") {
    Rng rng(6);
    const Dataset data = synth_data(rng, 100, 3);
    const auto f1 = fit_forest(data, 15, Rng(42));
    const auto f2 = fit_forest(data, 15, Rng(42));
    Rng qr(8);
    std::vector<double> q(3);
    for (int i = 0; i < 100; ++i) {
        for (double& v : q) v = qr.uniform();
        CHECK(f1->predict(q) == f2->predict(q));
    }
}

TEST_CASE("forest prediction is exactly the mean of its trees") {
    Rng rng(9);
    const Dataset data = synth_data(rng, 80, 2);
    const auto model = fit_forest(data, 9, Rng(1));
    const auto* forest = dynamic_cast<const ForestRegressor*>(model.get());
    REQUIRE(forest != nullptr);
    Rng qr(10);
    std::vector<double> q(2);
    for (int i = 0; i < 50; ++i) {
        for (double& v : q) v = qr.uniform();
        double s = 0.0;
        for (const auto& t : forest->trees()) s += t.predict(q);
        CHECK(model->predict(q) == s / static_cast<double>(forest->trees().size()));
    }
}

TEST_CASE("constant-mean predictors coincide") {
    // kNN with k=n, a depth-0 tree, and an infinitely shrunk ridge all
    // reduce to the global mean
    Rng rng(11);
    const Dataset data = synth_data(rng, 60, 2);
    const auto knn = fit_knn(data, data.rows);
    const auto tree = fit_tree(data, TreeParams{0, 1, 2});
    const auto ridge = fit_ridge(data, 1e12);
    Rng qr(12);
    std::vector<double> q(2);
    for (int i = 0; i < 50; ++i) {
        for (double& v : q) v = qr.uniform();
        CHECK(knn->predict(q) == doctest::Approx(tree->predict(q)).epsilon(1e-9));
        CHECK(ridge->predict(q) == doctest::Approx(tree->predict(q)).epsilon(1e-9));
    }
}

TEST_CASE("parameter validation") {
    Rng rng(13);
    const Dataset data = synth_data(rng, 30, 2);
    CHECK_THROWS_AS(fit_tree(data, TreeParams{30, 0, 2}), std::invalid_argument);
    CHECK_THROWS_AS(fit_tree(data, TreeParams{30, 5, 4}), std::invalid_argument);
    CHECK_THROWS_AS(fit_forest(data, 0, Rng(1)), std::invalid_argument);
}
