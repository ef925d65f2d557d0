#include <map>
#include <stdexcept>

#include "hetvar/regressors.hpp"

namespace hetvar {

const std::array<const char*, 12>& DictionaryConfig::machine_names() {
    static const std::array<const char*, 12> names{
        "rf50",  "rf150",  "rf500", "knn7", "knn13", "knn22",
        "lasso0.5", "lasso2", "ridge0.9", "ridge3", "tree", "enet"};
    return names;
}

MachineList build_dictionary(std::shared_ptr<const Dataset> data, const DictionaryConfig& config,
                             const Rng& rng) {
    if (!data) throw std::invalid_argument("build_dictionary: null dataset");
    const std::size_t max_k = *std::max_element(config.knn_ks.begin(), config.knn_ks.end());
    if (data->rows < max_k)
        throw std::invalid_argument("build_dictionary: need at least " + std::to_string(max_k) +
                                    " rows for the largest k");

    MachineList machines;
    machines.reserve(DictionaryConfig::machine_count);
    std::size_t m = 0;
    auto annotate = [&m](auto&& fit) -> std::shared_ptr<const Regressor> {
        try {
            auto r = fit();
            ++m;
            return r;
        } catch (const std::exception& e) {
            throw std::runtime_error("machine " + std::to_string(m) + " (" +
                                     DictionaryConfig::machine_names()[m] + "): " + e.what());
        }
    };

    for (const std::size_t ntree : config.forest_ntrees) {
        machines.push_back(annotate([&] {
            ForestParams p;
            p.ntree = ntree;
            return fit_forest(*data, p, rng.split(m));
        }));
    }
    for (const std::size_t k : config.knn_ks)
        machines.push_back(annotate([&] { return fit_knn(data, k); }));
    for (const double lambda : config.lasso_lambdas)
        machines.push_back(annotate([&] { return fit_lasso(*data, lambda); }));
    for (const double lambda : config.ridge_lambdas)
        machines.push_back(annotate([&] { return fit_ridge(*data, lambda); }));
    machines.push_back(annotate([&] { return fit_tree(*data, config.tree_params); }));
    machines.push_back(
        annotate([&] { return fit_enet(*data, config.enet_lambda, config.enet_alpha); }));
    return machines;
}

MachineList build_dictionary(const Dataset& data, const DictionaryConfig& config, const Rng& rng) {
    return build_dictionary(std::make_shared<Dataset>(data), config, rng);
}

CandidateSet predict_all(const MachineList& machines, const Dataset& queries) {
    CandidateSet out;
    out.rows = queries.rows;
    out.cols = machines.size();
    out.preds.assign(out.rows * out.cols, 0.0);

    // kNN machines sharing one training set ride a single neighbor search
    std::map<const Dataset*, std::vector<std::size_t>> knn_groups;
    for (std::size_t j = 0; j < machines.size(); ++j)
        if (const auto* knn = dynamic_cast<const KnnRegressor*>(machines[j].get()))
            knn_groups[knn->train().get()].push_back(j);

    for (auto& [train, members] : knn_groups) {
        std::size_t kmax = 0;
        for (const std::size_t j : members)
            kmax = std::max(kmax, static_cast<const KnnRegressor*>(machines[j].get())->k());
        const NeighborTable table = build_neighbor_table(*train, queries, kmax);
        for (const std::size_t j : members) {
            const auto k = static_cast<const KnnRegressor*>(machines[j].get())->k();
            auto col = out.col(j);
            for (std::size_t q = 0; q < queries.rows; ++q)
                col[q] = knn_mean_from_table(table, q, k, train->y);
        }
    }

    for (std::size_t j = 0; j < machines.size(); ++j) {
        if (dynamic_cast<const KnnRegressor*>(machines[j].get())) continue;
        machines[j]->predict_many(queries, out.col(j));
    }
    return out;
}

}  // namespace hetvar
