#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>
#include <stack>
#include <stdexcept>
#include <vector>

#include "hetvar/regressors.hpp"

namespace hetvar {

namespace {

// Column-major copy of the feature matrix; one column is ~16KB at desk scale
// and stays cache-resident through the gathers below.
std::vector<std::vector<double>> feature_columns(const Dataset& data) {
    std::vector<std::vector<double>> cols(data.dim, std::vector<double>(data.rows));
    for (std::size_t i = 0; i < data.rows; ++i) {
        const auto row = data.row(i);
        for (std::size_t f = 0; f < data.dim; ++f) cols[f][i] = row[f];
    }
    return cols;
}

std::vector<std::vector<std::uint32_t>> presort_features(
    const std::vector<std::vector<double>>& cols, std::size_t rows) {
    std::vector<std::vector<std::uint32_t>> order(cols.size());
    for (std::size_t f = 0; f < cols.size(); ++f) {
        auto& ord = order[f];
        ord.resize(rows);
        std::iota(ord.begin(), ord.end(), 0u);
        const double* col = cols[f].data();
        std::sort(ord.begin(), ord.end(), [col](std::uint32_t a, std::uint32_t b) {
            if (col[a] != col[b]) return col[a] < col[b];
            return a < b;
        });
    }
    return order;
}

// Greedy CART on presorted per-feature id arrays. A split partitions every
// array in lockstep (stable, via a per-row side mask), so nothing is
// re-sorted below the root. Splits maximize the variance reduction
//   sumL^2/nL + sumR^2/nR   (the parent term is constant),
// thresholds are midpoints of consecutive distinct values, and ties go to
// the lowest feature index, then the lowest threshold.
class CartBuilder {
public:
    CartBuilder(const std::vector<std::vector<double>>& xcol, const double* y,
                std::size_t n_rows, const TreeParams& params, std::size_t mtry, Rng rng)
        : xcol_(xcol), y_(y), d_(xcol.size()), params_(params), mtry_(mtry), rng_(rng),
          mask_(n_rows, 0) {
        ids_.resize(d_);
        feat_pool_.resize(d_);
        std::iota(feat_pool_.begin(), feat_pool_.end(), 0u);
    }

    // counts[row] = multiplicity of the row in this tree's sample (bootstrap);
    // base_order[f] = all rows sorted by feature f.
    void load(const std::vector<std::uint32_t>& counts,
              const std::vector<std::vector<std::uint32_t>>& base_order, std::size_t m) {
        m_ = m;
        for (std::size_t f = 0; f < d_; ++f) {
            ids_[f].resize(m);
            std::uint32_t* out = ids_[f].data();
            std::size_t w = 0;
            for (const std::uint32_t id : base_order[f])
                for (std::uint32_t c = counts[id]; c > 0; --c) out[w++] = id;
        }
        id_scratch_.resize(m);
        id_scratch2_.resize(m);
        inv_.resize(m + 1);
        inv_[0] = 0.0;
        for (std::size_t k = 1; k <= m; ++k) inv_[k] = 1.0 / static_cast<double>(k);
    }

    std::vector<TreeNode> build() {
        nodes_.assign(1, TreeNode{});
        struct Item {
            std::int32_t node;
            std::size_t lo, hi, depth;
        };
        std::stack<Item> work;
        work.push({0, 0, m_, 0});
        while (!work.empty()) {
            const Item it = work.top();
            work.pop();
            process(it.node, it.lo, it.hi, it.depth, work);
        }
        return std::move(nodes_);
    }

private:
    struct Split {
        double gain = -std::numeric_limits<double>::infinity();
        std::size_t feature = 0;
        double threshold = 0.0;
    };

    template <typename Stack>
    void process(std::int32_t node, std::size_t lo, std::size_t hi, std::size_t depth,
                 Stack& work) {
        const std::size_t m = hi - lo;
        const std::uint32_t* id0 = ids_[0].data();
        double sum = 0.0, ymin = y_[id0[lo]], ymax = ymin;
        for (std::size_t t = lo; t < hi; ++t) {
            const double v = y_[id0[t]];
            sum += v;
            ymin = std::min(ymin, v);
            ymax = std::max(ymax, v);
        }
        const double mean = sum / static_cast<double>(m);

        if (m < params_.min_split || depth >= params_.max_depth || ymin == ymax) {
            make_leaf(node, mean);
            return;
        }

        const Split best = find_split(lo, hi, sum);
        const double node_score = sum * sum / static_cast<double>(m);
        if (best.gain <= node_score + 1e-12 * (1.0 + std::abs(node_score))) {
            make_leaf(node, mean);
            return;
        }

        const std::size_t mid = partition(lo, hi, best.feature, best.threshold);
        const auto left = static_cast<std::int32_t>(nodes_.size());
        {
            TreeNode& parent = nodes_[static_cast<std::size_t>(node)];
            parent.feature = static_cast<std::int32_t>(best.feature);
            parent.threshold = best.threshold;
            parent.left = left;
            parent.right = left + 1;
        }
        nodes_.push_back(TreeNode{});  // invalidates references into nodes_
        nodes_.push_back(TreeNode{});
        work.push({left + 1, mid, hi, depth + 1});
        work.push({left, lo, mid, depth + 1});  // left processed first
    }

    void make_leaf(std::int32_t node, double mean) {
        nodes_[static_cast<std::size_t>(node)].feature = -1;
        nodes_[static_cast<std::size_t>(node)].value = mean;
    }

    Split find_split(std::size_t lo, std::size_t hi, double sum) {
        const std::size_t m = hi - lo;
        Split best;

        std::size_t n_cand = d_;
        if (mtry_ < d_) {
            // sample mtry distinct features, then scan them in ascending order
            for (std::size_t i = 0; i < mtry_; ++i) {
                const std::size_t j = i + static_cast<std::size_t>(rng_.below(d_ - i));
                std::swap(feat_pool_[i], feat_pool_[j]);
            }
            std::sort(feat_pool_.begin(), feat_pool_.begin() + static_cast<std::ptrdiff_t>(mtry_));
            n_cand = mtry_;
        }

        // positions with a min_leaf-respecting boundary: nL = t+1 in
        // [min_leaf, m - min_leaf]
        const std::size_t t_lo = params_.min_leaf - 1;
        const std::size_t t_hi = m - params_.min_leaf;  // exclusive
        for (std::size_t c = 0; c < n_cand; ++c) {
            const std::size_t f = (mtry_ < d_) ? feat_pool_[c] : c;
            const std::uint32_t* id = ids_[f].data() + lo;
            const double* xf = xcol_[f].data();
            double sumL = 0.0;
            for (std::size_t t = 0; t < t_lo; ++t) sumL += y_[id[t]];
            double v_cur = xf[id[t_lo]];
            for (std::size_t t = t_lo; t < t_hi; ++t) {
                sumL += y_[id[t]];
                const double v_next = xf[id[t + 1]];
                const double v_here = v_cur;
                v_cur = v_next;
                if (v_here >= v_next) continue;
                const double sumR = sum - sumL;
                const double gain = sumL * sumL * inv_[t + 1] + sumR * sumR * inv_[m - t - 1];
                if (gain > best.gain) {
                    double thr = 0.5 * (v_here + v_next);
                    if (!(thr < v_next)) thr = v_here;  // keep the cut exactly at the boundary
                    best = Split{gain, f, thr};
                }
            }
        }
        return best;
    }

    // Stable partition of every feature array over [lo,hi); returns the first
    // right-side position.
    std::size_t partition(std::size_t lo, std::size_t hi, std::size_t feature, double threshold) {
        const double* xf = xcol_[feature].data();
        const std::uint32_t* id0 = ids_[0].data();
        std::size_t nl = 0;
        for (std::size_t t = lo; t < hi; ++t) {
            const std::uint32_t id = id0[t];
            const std::uint8_t left = xf[id] <= threshold ? 1 : 0;
            mask_[id] = left;
            nl += left;
        }
        for (std::size_t f = 0; f < d_; ++f) {
            std::uint32_t* id = ids_[f].data();
            // branch-free stable split: stream into both buffers, advance one
            std::size_t wl = 0, wr = 0;
            for (std::size_t t = lo; t < hi; ++t) {
                const std::uint32_t v = id[t];
                const std::size_t left = mask_[v];
                id_scratch_[wl] = v;
                id_scratch2_[wr] = v;
                wl += left;
                wr += 1 - left;
            }
            std::copy_n(id_scratch_.data(), nl, id + lo);
            std::copy_n(id_scratch2_.data(), (hi - lo) - nl, id + lo + nl);
        }
        return lo + nl;
    }

    const std::vector<std::vector<double>>& xcol_;
    const double* y_;
    std::size_t d_;
    TreeParams params_;
    std::size_t mtry_;
    Rng rng_;
    std::size_t m_ = 0;
    std::vector<std::vector<std::uint32_t>> ids_;
    std::vector<double> inv_;  // inv_[k] = 1/k, keeps divisions out of the scan
    std::vector<std::uint8_t> mask_;
    std::vector<std::uint32_t> id_scratch_;
    std::vector<std::uint32_t> id_scratch2_;
    std::vector<std::uint32_t> feat_pool_;
    std::vector<TreeNode> nodes_;
};

}  // namespace

double TreeRegressor::predict(std::span<const double> x) const {
    std::int32_t at = 0;
    while (nodes_[static_cast<std::size_t>(at)].feature >= 0) {
        const TreeNode& nd = nodes_[static_cast<std::size_t>(at)];
        at = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes_[static_cast<std::size_t>(at)].value;
}

std::string TreeRegressor::dump_json() const {
    std::ostringstream os;
    os << "{\"kind\":\"tree\",\"nodes\":" << nodes_.size() << "}";
    return os.str();
}

double ForestRegressor::predict(std::span<const double> x) const {
    double s = 0.0;
    for (const auto& t : trees_) s += t.predict(x);
    return s / static_cast<double>(trees_.size());
}

void ForestRegressor::predict_many(const Dataset& queries, std::span<double> out) const {
    for (std::size_t q = 0; q < queries.rows; ++q) out[q] = predict(queries.row(q));
}

std::string ForestRegressor::dump_json() const {
    std::ostringstream os;
    os << "{\"kind\":\"forest\",\"ntree\":" << trees_.size() << "}";
    return os.str();
}

std::shared_ptr<const Regressor> fit_tree(const Dataset& data, const TreeParams& params) {
    data.validate();
    if (params.min_leaf < 1) throw std::invalid_argument("fit_tree: min_leaf must be >= 1");
    if (params.min_split < 2 * params.min_leaf)
        throw std::invalid_argument("fit_tree: min_split must be >= 2*min_leaf");

    const auto xcol = feature_columns(data);
    const auto base_order = presort_features(xcol, data.rows);
    const std::vector<std::uint32_t> counts(data.rows, 1);
    CartBuilder builder(xcol, data.y.data(), data.rows, params, data.dim, Rng(0));
    builder.load(counts, base_order, data.rows);
    return std::make_shared<TreeRegressor>(builder.build());
}

std::shared_ptr<const Regressor> fit_forest(const Dataset& data, const ForestParams& params,
                                            const Rng& rng) {
    data.validate();
    if (params.ntree < 1) throw std::invalid_argument("fit_forest: ntree must be >= 1");
    const std::size_t mtry =
        params.mtry > 0 ? std::min(params.mtry, data.dim) : std::max<std::size_t>(1, data.dim / 3);
    const TreeParams tp{30, params.min_leaf, 2 * params.min_leaf};

    const auto xcol = feature_columns(data);
    const auto base_order = presort_features(xcol, data.rows);
    std::vector<TreeRegressor> trees;
    trees.reserve(params.ntree);
    std::vector<std::uint32_t> counts(data.rows);
    for (std::size_t t = 0; t < params.ntree; ++t) {
        Rng tree_rng = rng.split(t);
        if (params.bootstrap) {
            std::fill(counts.begin(), counts.end(), 0u);
            for (std::size_t i = 0; i < data.rows; ++i) ++counts[tree_rng.below(data.rows)];
        } else {
            std::fill(counts.begin(), counts.end(), 1u);
        }
        CartBuilder builder(xcol, data.y.data(), data.rows, tp, mtry, tree_rng);
        builder.load(counts, base_order, data.rows);
        trees.emplace_back(builder.build());
    }
    return std::make_shared<ForestRegressor>(std::move(trees));
}

std::shared_ptr<const Regressor> fit_forest(const Dataset& data, std::size_t ntree,
                                            const Rng& rng) {
    ForestParams p;
    p.ntree = ntree;
    return fit_forest(data, p, rng);
}

}  // namespace hetvar
