#include <algorithm>
#include <cstdint>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "hetvar/regressors.hpp"

namespace hetvar {

void Regressor::predict_many(const Dataset& queries, std::span<double> out) const {
    if (out.size() != queries.rows) throw std::invalid_argument("predict_many: bad output size");
    for (std::size_t i = 0; i < queries.rows; ++i) out[i] = predict(queries.row(i));
}

std::string Regressor::dump_json() const { return "{\"kind\":\"" + kind() + "\"}"; }

namespace {

double dist2(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

// Indices of the k nearest training rows to `query`, ascending by
// (distance^2, row index). `scratch` holds one (dist, id) slot per row.
void nearest_ids(const Dataset& train, std::span<const double> query, std::size_t k,
                 std::vector<std::pair<double, std::uint32_t>>& scratch,
                 std::uint32_t* out) {
    const std::size_t n = train.rows;
    scratch.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        scratch[i] = {dist2(train.row(i), query), static_cast<std::uint32_t>(i)};
    auto mid = scratch.begin() + static_cast<std::ptrdiff_t>(k);
    std::nth_element(scratch.begin(), mid - 1, scratch.end());
    std::sort(scratch.begin(), mid);
    for (std::size_t j = 0; j < k; ++j) out[j] = scratch[j].second;
}

}  // namespace

NeighborTable build_neighbor_table(const Dataset& train, const Dataset& queries,
                                   std::size_t kmax) {
    if (kmax < 1 || kmax > train.rows)
        throw std::invalid_argument("build_neighbor_table: k out of range");
    if (train.dim != queries.dim)
        throw std::invalid_argument("build_neighbor_table: dimension mismatch");
    NeighborTable table;
    table.query_rows = queries.rows;
    table.k = kmax;
    table.ids.resize(queries.rows * kmax);
    std::vector<std::pair<double, std::uint32_t>> scratch;
    for (std::size_t q = 0; q < queries.rows; ++q)
        nearest_ids(train, queries.row(q), kmax, scratch, table.ids.data() + q * kmax);
    return table;
}

double knn_mean_from_table(const NeighborTable& table, std::size_t q, std::size_t k,
                           std::span<const double> targets) {
    const auto ids = table.row(q);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += targets[ids[j]];
    return s / static_cast<double>(k);
}

KnnRegressor::KnnRegressor(std::shared_ptr<const Dataset> train, std::size_t k)
    : train_(std::move(train)), k_(k) {
    if (!train_ || train_->rows == 0) throw std::invalid_argument("fit_knn: empty data");
    if (k_ < 1 || k_ > train_->rows)
        throw std::invalid_argument("fit_knn: k=" + std::to_string(k_) + " out of range for n=" +
                                    std::to_string(train_->rows));
}

double KnnRegressor::predict(std::span<const double> x) const {
    if (x.size() != train_->dim) throw std::invalid_argument("knn predict: dimension mismatch");
    std::vector<std::pair<double, std::uint32_t>> scratch;
    std::vector<std::uint32_t> ids(k_);
    nearest_ids(*train_, x, k_, scratch, ids.data());
    double s = 0.0;
    for (std::size_t j = 0; j < k_; ++j) s += train_->y[ids[j]];
    return s / static_cast<double>(k_);
}

void KnnRegressor::predict_many(const Dataset& queries, std::span<double> out) const {
    const NeighborTable table = build_neighbor_table(*train_, queries, k_);
    for (std::size_t q = 0; q < queries.rows; ++q)
        out[q] = knn_mean_from_table(table, q, k_, train_->y);
}

std::string KnnRegressor::dump_json() const {
    std::ostringstream os;
    os << "{\"kind\":\"knn\",\"k\":" << k_ << ",\"n\":" << train_->rows << "}";
    return os.str();
}

std::shared_ptr<const Regressor> fit_knn(std::shared_ptr<const Dataset> data, std::size_t k) {
    return std::make_shared<KnnRegressor>(std::move(data), k);
}

std::shared_ptr<const Regressor> fit_knn(const Dataset& data, std::size_t k) {
    return fit_knn(std::make_shared<Dataset>(data), k);
}

}  // namespace hetvar
