#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "mvreflect/errors.hpp"
#include "mvreflect/measures.hpp"
#include "mvreflect/path.hpp"
#include "mvreflect/rng.hpp"

namespace mvreflect {

// Transport plan between two empirical measures. Row sums reproduce the
// first marginal's weights, column sums the second's, within 1e-9.
struct CouplingPlan {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<double> matrix;  // row-major, n_rows x n_cols
    double cost = 0.0;           // sum plan_ij * ||x_i - y_j||^2

    double& at(std::size_t i, std::size_t j) { return matrix[i * n_cols + j]; }
    double at(std::size_t i, std::size_t j) const { return matrix[i * n_cols + j]; }

    Vec row_sums() const {
        Vec r(n_rows, 0.0);
        for (std::size_t i = 0; i < n_rows; ++i)
            for (std::size_t j = 0; j < n_cols; ++j) r[i] += at(i, j);
        return r;
    }
    Vec col_sums() const {
        Vec c(n_cols, 0.0);
        for (std::size_t i = 0; i < n_rows; ++i)
            for (std::size_t j = 0; j < n_cols; ++j) c[j] += at(i, j);
        return c;
    }
};

enum class W2Method { exact_sorted_1d, exact_min_cost_flow, sliced_estimate };

struct W2Result {
    double distance = 0.0;
    CouplingPlan plan;        // empty when approximate
    bool approximate = false; // true iff the sliced estimator was used
    W2Method method = W2Method::exact_min_cost_flow;
};

struct W2Options {
    std::size_t exact_cap = 1024;      // combined atom budget for the exact path
    std::size_t sliced_projections = 256;
    std::uint64_t sliced_seed = 0x5eedU;
};

namespace detail {

// Exact 1-D optimal transport via the quantile coupling of the sorted atoms.
inline W2Result wasserstein2_sorted_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                                       bool build_plan) {
    const std::size_t n = mu.size(), m = nu.size();
    std::vector<std::size_t> sa(n), sb(m);
    std::iota(sa.begin(), sa.end(), std::size_t{0});
    std::iota(sb.begin(), sb.end(), std::size_t{0});
    std::sort(sa.begin(), sa.end(), [&](std::size_t a, std::size_t b) { return mu.point(a)[0] < mu.point(b)[0]; });
    std::sort(sb.begin(), sb.end(), [&](std::size_t a, std::size_t b) { return nu.point(a)[0] < nu.point(b)[0]; });

    W2Result res;
    res.method = W2Method::exact_sorted_1d;
    if (build_plan) {
        res.plan.n_rows = n;
        res.plan.n_cols = m;
        res.plan.matrix.assign(n * m, 0.0);
    }
    std::size_t i = 0, j = 0;
    double wa = mu.weight(sa[0]), wb = nu.weight(sb[0]);
    double cost = 0.0;
    while (true) {
        const double mass = std::min(wa, wb);
        const double diff = mu.point(sa[i])[0] - nu.point(sb[j])[0];
        cost += mass * diff * diff;
        if (build_plan) res.plan.at(sa[i], sb[j]) += mass;
        wa -= mass;
        wb -= mass;
        if (wa <= 1e-16) {
            if (++i >= n) break;
            wa = mu.weight(sa[i]);
        }
        if (wb <= 1e-16) {
            if (++j >= m) break;
            wb = nu.weight(sb[j]);
        }
    }
    res.plan.cost = cost;
    res.distance = std::sqrt(std::max(cost, 0.0));
    return res;
}

// Exact transport by successive shortest augmenting paths on the dense
// bipartite network, with node potentials keeping reduced costs nonnegative.
// At most n+m augmentations, each a dense Dijkstra over n+m nodes.
inline W2Result wasserstein2_min_cost_flow(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    const std::size_t n = mu.size(), m = nu.size();
    const std::size_t V = n + m;
    const double inf = std::numeric_limits<double>::infinity();

    std::vector<double> cost(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) cost[i * m + j] = sq_dist(mu.point(i), nu.point(j));

    std::vector<double> flow(n * m, 0.0);
    Vec rem_a = mu.weights(), rem_b = nu.weights();
    std::vector<double> pot(V, 0.0);
    std::vector<double> dist_to(V);
    std::vector<int> parent(V);
    std::vector<char> done(V);

    const double eps_mass = 1e-15;
    double remaining = 1.0;
    std::size_t guard = 2 * V + 16;

    while (remaining > 1e-13 && guard-- > 0) {
        std::fill(dist_to.begin(), dist_to.end(), inf);
        std::fill(parent.begin(), parent.end(), -1);
        std::fill(done.begin(), done.end(), 0);
        for (std::size_t i = 0; i < n; ++i)
            if (rem_a[i] > eps_mass) dist_to[i] = 0.0;

        for (std::size_t it = 0; it < V; ++it) {
            std::size_t u = V;
            double best = inf;
            for (std::size_t v = 0; v < V; ++v)
                if (!done[v] && dist_to[v] < best) { best = dist_to[v]; u = v; }
            if (u == V) break;
            done[u] = 1;
            if (u < n) {
                for (std::size_t j = 0; j < m; ++j) {
                    const double rc = cost[u * m + j] + pot[u] - pot[n + j];
                    const double cand = dist_to[u] + std::max(rc, 0.0);
                    if (cand < dist_to[n + j]) { dist_to[n + j] = cand; parent[n + j] = static_cast<int>(u); }
                }
            } else {
                const std::size_t j = u - n;
                for (std::size_t i = 0; i < n; ++i) {
                    if (flow[i * m + j] <= eps_mass) continue;
                    const double rc = -cost[i * m + j] + pot[u] - pot[i];
                    const double cand = dist_to[u] + std::max(rc, 0.0);
                    if (cand < dist_to[i]) { dist_to[i] = cand; parent[i] = static_cast<int>(u); }
                }
            }
        }

        std::size_t sink = V;
        double best = inf;
        for (std::size_t j = 0; j < m; ++j)
            if (rem_b[j] > eps_mass && dist_to[n + j] < best) { best = dist_to[n + j]; sink = n + j; }
        if (sink == V)
            throw Error(ErrorCode::argument, "transport network has no augmenting path");

        for (std::size_t v = 0; v < V; ++v)
            if (dist_to[v] < inf) pot[v] += dist_to[v];

        // Bottleneck along the path: sink demand, source supply, and any
        // backward-arc flow in between.
        double amount = rem_b[sink - n];
        std::size_t src = sink;
        for (std::size_t v = sink; parent[v] >= 0; v = static_cast<std::size_t>(parent[v])) {
            const std::size_t p = static_cast<std::size_t>(parent[v]);
            if (p >= n) amount = std::min(amount, flow[v * m + (p - n)]);  // backward arc j->i
            src = p;
        }
        amount = std::min(amount, rem_a[src]);

        for (std::size_t v = sink; parent[v] >= 0; v = static_cast<std::size_t>(parent[v])) {
            const std::size_t p = static_cast<std::size_t>(parent[v]);
            if (p < n) flow[p * m + (v - n)] += amount;   // forward i->j
            else flow[v * m + (p - n)] -= amount;          // backward j->i
        }
        rem_a[src] -= amount;
        rem_b[sink - n] -= amount;
        remaining -= amount;
        if (amount <= eps_mass) break;
    }

    if (remaining > 1e-10)
        throw Error(ErrorCode::argument, "transport solver left unrouted mass");

    W2Result res;
    res.method = W2Method::exact_min_cost_flow;
    res.plan.n_rows = n;
    res.plan.n_cols = m;
    res.plan.matrix = std::move(flow);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) total += res.plan.at(i, j) * cost[i * m + j];
    res.plan.cost = total;
    res.distance = std::sqrt(std::max(total, 0.0));
    return res;
}

inline W2Result wasserstein2_sliced(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                                    const W2Options& opt) {
    CounterRng rng(derive_seed(opt.sliced_seed, "transport.sliced"));
    const std::size_t d = mu.dim();
    double acc = 0.0;
    std::vector<std::pair<double, double>> pa(mu.size()), pb(nu.size());
    for (std::size_t p = 0; p < opt.sliced_projections; ++p) {
        const Vec dir = rng.unit_vec(d);
        for (std::size_t i = 0; i < mu.size(); ++i) pa[i] = {dot(mu.point(i), dir), mu.weight(i)};
        for (std::size_t j = 0; j < nu.size(); ++j) pb[j] = {dot(nu.point(j), dir), nu.weight(j)};
        std::sort(pa.begin(), pa.end());
        std::sort(pb.begin(), pb.end());
        std::size_t i = 0, j = 0;
        double wa = pa[0].second, wb = pb[0].second, cost = 0.0;
        while (true) {
            const double mass = std::min(wa, wb);
            const double diff = pa[i].first - pb[j].first;
            cost += mass * diff * diff;
            wa -= mass;
            wb -= mass;
            if (wa <= 1e-16) { if (++i >= pa.size()) break; wa = pa[i].second; }
            if (wb <= 1e-16) { if (++j >= pb.size()) break; wb = pb[j].second; }
        }
        acc += cost;
    }
    W2Result res;
    res.method = W2Method::sliced_estimate;
    res.approximate = true;
    res.distance = std::sqrt(std::max(acc / static_cast<double>(opt.sliced_projections), 0.0));
    return res;
}

} // namespace detail

// Wasserstein-2 distance with squared Euclidean cost. Exact for d = 1 (sorted
// closed form) and for combined atom counts within exact_cap (min-cost flow);
// the sliced estimator beyond that, flagged via `approximate`.
inline W2Result wasserstein2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                             const W2Options& opt = {}) {
    if (mu.size() == 0 || nu.size() == 0)
        throw Error(ErrorCode::argument, "wasserstein2 needs nonempty measures");
    if (mu.dim() != nu.dim())
        throw Error(ErrorCode::shape, "wasserstein2 dimension mismatch");
    if (mu.dim() == 1)
        return detail::wasserstein2_sorted_1d(mu, nu, mu.size() + nu.size() <= opt.exact_cap);
    if (mu.size() + nu.size() <= opt.exact_cap)
        return detail::wasserstein2_min_cost_flow(mu, nu);
    return detail::wasserstein2_sliced(mu, nu, opt);
}

// ---------------------------------------------------------------------------
// Path-ensemble distances
// ---------------------------------------------------------------------------

enum class PathDistanceMode {
    identity_coupling,  // mean over paired particles of sup-norm^2; an upper bound
    grid_proxy,         // sup over grid nodes of the per-node W2; a lower-bound proxy
};

inline double truncated_path_distance(const ParticleEnsemble& a, const ParticleEnsemble& b,
                                      double t_cut, PathDistanceMode mode,
                                      const W2Options& opt = {}) {
    if (!(a.grid == b.grid))
        throw Error(ErrorCode::argument, "path distance requires a shared grid");
    std::size_t cut_node = 0;
    for (std::size_t k = 0; k < a.grid.n_nodes(); ++k)
        if (a.grid.node(k) <= t_cut + 1e-12 * a.grid.horizon) cut_node = k;

    if (mode == PathDistanceMode::identity_coupling) {
        if (a.size() != b.size())
            throw Error(ErrorCode::argument, "identity coupling requires equal particle counts");
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            double sup2 = 0.0;
            for (std::size_t k = 0; k <= cut_node; ++k)
                sup2 = std::max(sup2, sq_dist(a.paths[i].states[k], b.paths[i].states[k]));
            acc += sup2;
        }
        return std::sqrt(acc / static_cast<double>(a.size()));
    }

    double sup = 0.0;
    for (std::size_t k = 0; k <= cut_node; ++k)
        sup = std::max(sup, wasserstein2(a.measure_at_node(k), b.measure_at_node(k), opt).distance);
    return sup;
}

struct PushforwardRow {
    double proxy;
    double identity;
    double margin;
};

struct PushforwardReport {
    std::vector<PushforwardRow> rows;
    bool ok = true;  // proxy <= identity on every sampled pair
};

// Splits the ensemble into random halves and verifies that the grid proxy
// never exceeds the identity-coupling path distance.
inline PushforwardReport pushforward_check(const ParticleEnsemble& ensemble,
                                           std::size_t n_pairs = 20, std::uint64_t seed = 0) {
    if (ensemble.size() < 2)
        throw Error(ErrorCode::argument, "pushforward check needs at least two paths");
    PushforwardReport report;
    CounterRng rng(derive_seed(seed, "transport.pushforward"));
    const std::size_t half = ensemble.size() / 2;
    std::vector<std::size_t> idx(ensemble.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});

    for (std::size_t trial = 0; trial < n_pairs; ++trial) {
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[rng.index(i)]);
        ParticleEnsemble a, b;
        a.grid = b.grid = ensemble.grid;
        for (std::size_t i = 0; i < half; ++i) {
            a.paths.push_back(ensemble.paths[idx[i]]);
            b.paths.push_back(ensemble.paths[idx[half + i]]);
        }
        const double proxy = truncated_path_distance(a, b, ensemble.grid.horizon, PathDistanceMode::grid_proxy);
        const double ident = truncated_path_distance(a, b, ensemble.grid.horizon, PathDistanceMode::identity_coupling);
        report.rows.push_back({proxy, ident, ident - proxy});
        if (proxy > ident + 1e-9) report.ok = false;
    }
    return report;
}

} // namespace mvreflect
