#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hetvar/dataset.hpp"
#include "hetvar/rng.hpp"

namespace hetvar {

// A fitted prediction rule x -> yhat. Fitting happens in the fit_* free
// functions; a fitted regressor is immutable and safe to share across
// threads.
class Regressor {
public:
    virtual ~Regressor() = default;
    virtual double predict(std::span<const double> x) const = 0;
    virtual void predict_many(const Dataset& queries, std::span<double> out) const;
    virtual std::string kind() const = 0;
    // Debug dump of the fitted state as JSON text. Not used by the pipeline.
    virtual std::string dump_json() const;
};

using MachineList = std::vector<std::shared_ptr<const Regressor>>;

// ---------------------------------------------------------------------------
// k-nearest neighbors (exact brute force, Euclidean distance on raw features,
// ties broken by lowest training-row index)

// Neighbor ids for a batch of queries, each row sorted ascending by
// (distance^2, train index). Lets several kNN machines that share a training
// set reuse one search.
struct NeighborTable {
    std::size_t query_rows = 0;
    std::size_t k = 0;
    std::vector<std::uint32_t> ids;  // query_rows * k

    std::span<const std::uint32_t> row(std::size_t q) const { return {ids.data() + q * k, k}; }
};

NeighborTable build_neighbor_table(const Dataset& train, const Dataset& queries, std::size_t kmax);
// Mean of targets over the first k entries of a table row.
double knn_mean_from_table(const NeighborTable& table, std::size_t q, std::size_t k,
                           std::span<const double> targets);

class KnnRegressor final : public Regressor {
public:
    KnnRegressor(std::shared_ptr<const Dataset> train, std::size_t k);
    double predict(std::span<const double> x) const override;
    void predict_many(const Dataset& queries, std::span<double> out) const override;
    std::string kind() const override { return "knn"; }
    std::string dump_json() const override;

    std::size_t k() const { return k_; }
    const std::shared_ptr<const Dataset>& train() const { return train_; }

private:
    std::shared_ptr<const Dataset> train_;
    std::size_t k_;
};

std::shared_ptr<const Regressor> fit_knn(const Dataset& data, std::size_t k);
std::shared_ptr<const Regressor> fit_knn(std::shared_ptr<const Dataset> data, std::size_t k);

// ---------------------------------------------------------------------------
// Penalized linear models. Features are standardized internally (center +
// population-std scale); the intercept is unpenalized. Objectives use the
// 1/(2n) convention:
//   (1/2n)||y - Xb - b0||^2 + lambda*(alpha*||b||_1 + (1-alpha)/2*||b||^2)
// so ridge = enet(alpha=0) and lasso = enet(alpha=1). Ridge is solved in
// closed form, lasso/enet by cyclic coordinate descent with soft
// thresholding (converged when the max coefficient change per sweep is
// below 1e-7; throws after 1e4 sweeps).

class LinearRegressor final : public Regressor {
public:
    LinearRegressor(std::string kind, std::vector<double> weights, double intercept);
    double predict(std::span<const double> x) const override;
    std::string kind() const override { return kind_; }
    std::string dump_json() const override;

    // Raw-space coefficients (standardization already folded in).
    const std::vector<double>& weights() const { return weights_; }
    double intercept() const { return intercept_; }

private:
    std::string kind_;
    std::vector<double> weights_;
    double intercept_;
};

std::shared_ptr<const Regressor> fit_ridge(const Dataset& data, double lambda);
std::shared_ptr<const Regressor> fit_lasso(const Dataset& data, double lambda);
std::shared_ptr<const Regressor> fit_enet(const Dataset& data, double lambda, double alpha);

// ---------------------------------------------------------------------------
// CART regression tree and random forest

struct TreeParams {
    std::size_t max_depth = 30;
    std::size_t min_leaf = 5;
    std::size_t min_split = 10;
};

struct ForestParams {
    std::size_t ntree = 500;
    std::size_t mtry = 0;  // 0 = max(1, floor(d/3))
    std::size_t min_leaf = 5;
    bool bootstrap = true;  // test hook; production forests always bootstrap
};

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    std::int32_t left = -1;
    std::int32_t right = -1;
    double threshold = 0.0;
    double value = 0.0;  // leaf mean
};

class TreeRegressor final : public Regressor {
public:
    explicit TreeRegressor(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}
    double predict(std::span<const double> x) const override;
    std::string kind() const override { return "tree"; }
    std::string dump_json() const override;
    const std::vector<TreeNode>& nodes() const { return nodes_; }

private:
    std::vector<TreeNode> nodes_;
};

class ForestRegressor final : public Regressor {
public:
    explicit ForestRegressor(std::vector<TreeRegressor> trees) : trees_(std::move(trees)) {}
    double predict(std::span<const double> x) const override;
    void predict_many(const Dataset& queries, std::span<double> out) const override;
    std::string kind() const override { return "forest"; }
    std::string dump_json() const override;
    const std::vector<TreeRegressor>& trees() const { return trees_; }

private:
    std::vector<TreeRegressor> trees_;
};

std::shared_ptr<const Regressor> fit_tree(const Dataset& data, const TreeParams& params);
std::shared_ptr<const Regressor> fit_forest(const Dataset& data, std::size_t ntree, const Rng& rng);
std::shared_ptr<const Regressor> fit_forest(const Dataset& data, const ForestParams& params, const Rng& rng);

// ---------------------------------------------------------------------------
// The 12-machine dictionary of the simulation study, in fixed order:
// forest x3 (ntree 50/150/500), knn x3 (k 7/13/22), lasso x2 (0.5/2),
// ridge x2 (0.9/3), tree, elastic net (lambda 1, alpha 0.6).

struct DictionaryConfig {
    std::array<std::size_t, 3> forest_ntrees{50, 150, 500};
    std::array<std::size_t, 3> knn_ks{7, 13, 22};
    std::array<double, 2> lasso_lambdas{0.5, 2.0};
    std::array<double, 2> ridge_lambdas{0.9, 3.0};
    double enet_lambda = 1.0;
    double enet_alpha = 0.6;
    TreeParams tree_params{};

    static constexpr std::size_t machine_count = 12;
    static const std::array<const char*, 12>& machine_names();
};

// Fits all 12 machines. Forest randomness comes from rng.split(machine index),
// so two dictionaries built from the same (data, rng) are identical.
MachineList build_dictionary(std::shared_ptr<const Dataset> data, const DictionaryConfig& config,
                             const Rng& rng);
MachineList build_dictionary(const Dataset& data, const DictionaryConfig& config, const Rng& rng);

// Candidate predictions on one sample: column m holds machine m's
// predictions, targets is what they are scored against.
struct CandidateSet {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> preds;  // column-major, cols * rows
    std::vector<double> targets;

    std::span<const double> col(std::size_t m) const { return {preds.data() + m * rows, rows}; }
    std::span<double> col(std::size_t m) { return {preds.data() + m * rows, rows}; }
};

// Prediction matrix of every machine on `queries` (column-major). kNN
// machines sharing a training set are served from one neighbor search.
CandidateSet predict_all(const MachineList& machines, const Dataset& queries);

}  // namespace hetvar
