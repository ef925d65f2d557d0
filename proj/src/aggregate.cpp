#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "hetvar/aggregate.hpp"
#include "hetvar/dataset.hpp"

namespace hetvar {

std::string weights_to_json(const SimplexWeights& weights) {
    std::ostringstream os;
    os << '[';
    for (std::size_t j = 0; j < weights.size(); ++j)
        os << (j ? "," : "") << format_double(weights[j]);
    os << ']';
    return os.str();
}

double empirical_risk(std::span<const double> preds, std::span<const double> targets) {
    if (preds.size() != targets.size() || preds.empty())
        throw std::invalid_argument("empirical_risk: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double d = targets[i] - preds[i];
        s += d * d;
    }
    return s / static_cast<double>(preds.size());
}

std::size_t ms_select(const CandidateSet& cands) {
    if (cands.cols < 1 || cands.rows < 1) throw std::invalid_argument("ms_select: empty set");
    std::size_t best = 0;
    double best_risk = empirical_risk(cands.col(0), cands.targets);
    for (std::size_t m = 1; m < cands.cols; ++m) {
        const double r = empirical_risk(cands.col(m), cands.targets);
        if (r < best_risk) {
            best_risk = r;
            best = m;
        }
    }
    return best;
}

SimplexWeights project_simplex(std::span<const double> v) {
    const std::size_t m = v.size();
    if (m == 0) throw std::invalid_argument("project_simplex: empty vector");
    for (const double vi : v)
        if (!std::isfinite(vi)) throw std::invalid_argument("project_simplex: non-finite entry");

    // sort-and-threshold (Held et al. / Michelot)
    std::vector<double> u(v.begin(), v.end());
    std::sort(u.begin(), u.end(), std::greater<double>());
    double running = 0.0, tau = 0.0;
    std::size_t rho = 0;
    for (std::size_t j = 0; j < m; ++j) {
        running += u[j];
        const double candidate = (running - 1.0) / static_cast<double>(j + 1);
        if (u[j] - candidate > 0.0) {
            rho = j + 1;
            tau = candidate;
        }
    }
    SimplexWeights w;
    w.w.resize(m);
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        w.w[j] = std::max(v[j] - tau, 0.0);
        total += w.w[j];
    }
    (void)rho;
    // kill accumulated rounding so the invariants hold to 1e-12
    if (total > 0.0 && total != 1.0)
        for (double& wj : w.w) wj /= total;
    return w;
}

namespace {

struct Quadratic {
    // f(w) = w'Gw - 2b'w + c  ==  (1/N)||targets - preds*w||^2
    std::vector<double> G;  // m*m
    std::vector<double> b;  // m
    double c = 0.0;
    std::size_t m = 0;

    double value(const std::vector<double>& w) const {
        double quad = 0.0, lin = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            double gw = 0.0;
            for (std::size_t k = 0; k < m; ++k) gw += G[j * m + k] * w[k];
            quad += w[j] * gw;
            lin += b[j] * w[j];
        }
        return quad - 2.0 * lin + c;
    }

    void gradient(const std::vector<double>& w, std::vector<double>& g) const {
        for (std::size_t j = 0; j < m; ++j) {
            double gw = 0.0;
            for (std::size_t k = 0; k < m; ++k) gw += G[j * m + k] * w[k];
            g[j] = 2.0 * (gw - b[j]);
        }
    }
};

Quadratic build_quadratic(const CandidateSet& cands) {
    const std::size_t n = cands.rows, m = cands.cols;
    Quadratic q;
    q.m = m;
    q.G.assign(m * m, 0.0);
    q.b.assign(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        const auto cj = cands.col(j);
        for (std::size_t k = j; k < m; ++k) {
            const auto ck = cands.col(k);
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += cj[i] * ck[i];
            s /= static_cast<double>(n);
            q.G[j * m + k] = s;
            q.G[k * m + j] = s;
        }
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += cj[i] * cands.targets[i];
        q.b[j] = s / static_cast<double>(n);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += cands.targets[i] * cands.targets[i];
    q.c = s / static_cast<double>(n);
    return q;
}

// Projected gradient descent from `start` with 1/L step; stops once the
// objective decrease stays below 1e-10 for 3 consecutive iterations and the
// last step is small enough for the KKT residual to be negligible.
ConvexFitResult pgd(const Quadratic& q, double L, std::vector<double> w,
                    std::vector<double>* trace, std::size_t max_iter) {
    std::vector<double> g(q.m), step(q.m);
    double prev = q.value(w);
    std::size_t stall = 0, iter = 0;
    for (; iter < max_iter; ++iter) {
        q.gradient(w, g);
        for (std::size_t j = 0; j < q.m; ++j) step[j] = w[j] - g[j] / L;
        SimplexWeights projected = project_simplex(step);
        double move = 0.0;
        for (std::size_t j = 0; j < q.m; ++j)
            move = std::max(move, std::abs(projected.w[j] - w[j]));
        w = std::move(projected.w);
        const double cur = q.value(w);
        if (!std::isfinite(cur)) throw std::runtime_error("convex_weights: non-finite objective");
        if (trace) trace->push_back(cur);
        if (prev - cur < 1e-10) {
            ++stall;
            if (stall >= 3 && L * move <= 1e-6) break;
        } else {
            stall = 0;
        }
        prev = std::min(prev, cur);
    }
    ConvexFitResult res;
    res.weights.w = std::move(w);
    res.objective = q.value(res.weights.w);
    res.iterations = iter;
    return res;
}

}  // namespace

ConvexFitResult convex_weights(const CandidateSet& cands, std::vector<double>* trace) {
    const std::size_t m = cands.cols;
    if (m < 1 || cands.rows < 1) throw std::invalid_argument("convex_weights: empty set");
    if (m == 1) {
        ConvexFitResult res;
        res.weights.w = {1.0};
        res.objective = empirical_risk(cands.col(0), cands.targets);
        return res;
    }

    const Quadratic q = build_quadratic(cands);

    // Gershgorin bound on the Hessian 2G
    double L = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        double row = 0.0;
        for (std::size_t k = 0; k < m; ++k) row += std::abs(q.G[j * m + k]);
        L = std::max(L, 2.0 * row);
    }
    if (L <= 0.0) L = 1.0;  // all-zero candidates; any feasible point is optimal

    ConvexFitResult best = pgd(q, L, std::vector<double>(m, 1.0 / static_cast<double>(m)), trace,
                               100000);

    // Vertices are feasible, so the aggregate must never lose to a single
    // candidate; restart from the best vertex if the first run stalled above
    // it.
    std::size_t best_vertex = 0;
    double best_vertex_obj = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
        const double r = empirical_risk(cands.col(j), cands.targets);
        if (r < best_vertex_obj) {
            best_vertex_obj = r;
            best_vertex = j;
        }
    }
    if (best.objective > best_vertex_obj) {
        std::vector<double> vertex(m, 0.0);
        vertex[best_vertex] = 1.0;
        ConvexFitResult rerun = pgd(q, L, std::move(vertex), trace, 100000);
        if (rerun.objective < best.objective) best = std::move(rerun);
        if (best.objective > best_vertex_obj) {
            best.weights.w.assign(m, 0.0);
            best.weights.w[best_vertex] = 1.0;
            best.objective = best_vertex_obj;
        }
    }
    return best;
}

double predict_ms(const MachineList& machines, std::size_t idx, std::span<const double> x) {
    if (idx >= machines.size()) throw std::invalid_argument("predict_ms: index out of range");
    return machines[idx]->predict(x);
}

double predict_convex(const MachineList& machines, const SimplexWeights& weights,
                      std::span<const double> x) {
    if (weights.size() != machines.size())
        throw std::invalid_argument("predict_convex: weight/machine count mismatch");
    double s = 0.0;
    for (std::size_t j = 0; j < machines.size(); ++j) s += weights[j] * machines[j]->predict(x);
    return s;
}

}  // namespace hetvar
