#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mvreflect/parallel.hpp"
#include "mvreflect/reflection.hpp"
#include "mvreflect/transport.hpp"

namespace mvreflect {

// Per-particle Gaussian increment streams, indexed by (particle, step,
// component) counters. Streams for distinct particles are derived from
// independent keys, and any (particle, step) increment can be regenerated in
// isolation, which keeps multi-worker runs bit-reproducible.
class NoiseDriver {
public:
    explicit NoiseDriver(std::uint64_t master_seed, std::string_view purpose = "noise")
        : master_seed_(master_seed), purpose_(purpose) {}

    std::uint64_t master_seed() const { return master_seed_; }

    std::uint64_t stream_key(std::size_t particle) const {
        return derive_seed(master_seed_, purpose_, particle);
    }

    // Increment ~ N(0, dt I_m) for the given particle and step.
    void fill_increment(std::size_t particle, std::size_t step, std::size_t m, double dt, Vec& out) const {
        out.resize(m);
        const std::uint64_t key = stream_key(particle);
        const double scale = std::sqrt(dt);
        for (std::size_t j = 0; j < m; ++j)
            out[j] = scale * counter_gaussian(key, step * m + j);
    }

    Vec increment(std::size_t particle, std::size_t step, std::size_t m, double dt) const {
        Vec out;
        fill_increment(particle, step, m, dt, out);
        return out;
    }

    std::vector<Vec> increments(std::size_t particle, const TimeGrid& grid, std::size_t m) const {
        std::vector<Vec> path(grid.n_steps);
        for (std::size_t k = 0; k < grid.n_steps; ++k)
            fill_increment(particle, k, m, grid.node(k + 1) - grid.node(k), path[k]);
        return path;
    }

private:
    std::uint64_t master_seed_;
    std::string purpose_;
};

using InitialSampler = std::function<Vec(std::size_t)>;

inline InitialSampler fixed_start(Vec x0) {
    return [x0 = std::move(x0)](std::size_t) { return x0; };
}

// Uniform sampler over the closed section at t = 0, rejection from the
// bounding box, keyed by the master seed and particle index.
inline InitialSampler uniform_section_start(const TimeDomain& domain, std::uint64_t master_seed) {
    return [domain, master_seed](std::size_t i) {
        CounterRng rng(derive_seed(master_seed, "x0", i));
        for (int tries = 0; tries < 4096; ++tries) {
            Vec x(domain.dim);
            for (double& v : x) v = rng.uniform(-domain.bounding_radius, domain.bounding_radius);
            if (domain.dist(0.0, x) <= 0.0) return x;
        }
        throw Error(ErrorCode::geometry_search, "could not sample an initial point in the t=0 section");
    };
}

// ---------------------------------------------------------------------------
// Simulators
// ---------------------------------------------------------------------------

// n-particle interacting system: every particle is advanced against the
// empirical measure of the step-start positions. Particles within one step
// are independent given that snapshot, so the inner loop parallelizes; the
// snapshot boundary is the synchronization point.
//
// stream_index optionally relabels the noise streams (particle i reads
// stream stream_index[i]); the default is the identity.
inline ParticleEnsemble simulate_interacting(const TimeDomain& domain, const DirectionField& field,
                                             const CoefficientSet& cs, std::size_t n,
                                             const InitialSampler& x0_sampler, const TimeGrid& grid,
                                             const NoiseDriver& driver, double noise_scale,
                                             std::size_t workers = 0,
                                             const std::vector<std::size_t>& stream_index = {}) {
    if (n < 1) throw Error(ErrorCode::argument, "need at least one particle");
    if (!stream_index.empty() && stream_index.size() != n)
        throw Error(ErrorCode::argument, "stream index size mismatch");

    ParticleEnsemble ens;
    ens.grid = grid;
    ens.paths.resize(n);
    ens.seeds.resize(n);

    std::vector<ReflectedState> states(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t stream = stream_index.empty() ? i : stream_index[i];
        ens.seeds[i] = driver.stream_key(stream);
        Vec x0 = x0_sampler(i);
        if (distance(domain, 0.0, x0) > domain.boundary_tol())
            throw Error(ErrorCode::argument, "initial sample outside the closed section at t = 0");
        states[i].x = x0;
        states[i].reflector = zeros(domain.dim);
        states[i].t = 0.0;
        auto& p = ens.paths[i];
        p.times = grid.nodes();
        p.states.reserve(grid.n_nodes());
        p.local_time.reserve(grid.n_nodes());
        p.reflector.reserve(grid.n_nodes());
        p.xi_steps.reserve(grid.n_steps);
        p.states.push_back(states[i].x);
        p.local_time.push_back(0.0);
        p.reflector.push_back(states[i].reflector);
    }

    for (std::size_t k = 0; k < grid.n_steps; ++k) {
        std::vector<Vec> snapshot(n);
        for (std::size_t i = 0; i < n; ++i) snapshot[i] = states[i].x;
        const EmpiricalMeasure mu = EmpiricalMeasure::uniform(std::move(snapshot));
        const double dt = grid.node(k + 1) - grid.node(k);

        std::vector<std::string> step_errors(n);
        parallel_for(n, workers, [&](std::size_t i) {
            try {
                const std::size_t stream = stream_index.empty() ? i : stream_index[i];
                Vec dw;
                driver.fill_increment(stream, k, cs.noise_dim, dt, dw);
                ReflectedState next = constrained_euler_step(domain, field, cs, states[i], mu, dt, dw, noise_scale);
                next.t = grid.node(k + 1);
                ens.paths[i].xi_steps.push_back(next.local_time - states[i].local_time);
                states[i] = std::move(next);
                ens.paths[i].states.push_back(states[i].x);
                ens.paths[i].local_time.push_back(states[i].local_time);
                ens.paths[i].reflector.push_back(states[i].reflector);
            } catch (const Error& e) {
                step_errors[i] = e.what();
            }
        });
        for (std::size_t i = 0; i < n; ++i)
            if (!step_errors[i].empty())
                throw Error(ErrorCode::projection_failure,
                            step_errors[i] + " (particle " + std::to_string(i) + ", step " + std::to_string(k) + ")");
    }
    return ens;
}

// Independent copies of the frozen-law dynamics: coefficients read the given
// flow, never the copies' own empirical law.
inline ParticleEnsemble simulate_frozen_law(const TimeDomain& domain, const DirectionField& field,
                                            const CoefficientSet& cs, const Vec& x0,
                                            const MeasureFlow& flow, const TimeGrid& grid,
                                            const NoiseDriver& driver, double noise_scale,
                                            std::size_t n_copies, std::size_t workers = 0) {
    if (flow.n_nodes() != grid.n_nodes())
        throw Error(ErrorCode::argument, "measure flow does not match the grid");
    ParticleEnsemble ens;
    ens.grid = grid;
    ens.paths.resize(n_copies);
    ens.seeds.resize(n_copies);
    std::vector<std::string> errors(n_copies);
    parallel_for(n_copies, workers, [&](std::size_t i) {
        try {
            ens.seeds[i] = driver.stream_key(i);
            ens.paths[i] = drive_path(domain, field, cs, x0, flow, grid,
                                      driver.increments(i, grid, cs.noise_dim), noise_scale);
        } catch (const Error& e) {
            errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < n_copies; ++i)
        if (!errors[i].empty())
            throw Error(ErrorCode::projection_failure, errors[i] + " (copy " + std::to_string(i) + ")");
    return ens;
}

// ---------------------------------------------------------------------------
// Fixed point of the measure-flow map
// ---------------------------------------------------------------------------

struct PicardResult {
    MeasureFlow flow;
    std::vector<double> history;  // sup-over-grid W2 between successive flows
    bool converged = false;
    std::size_t iterations = 0;
};

// Picard iteration mu^{k+1} = empirical flow of the frozen-law simulation
// against mu^k, with common random numbers across iterations so the
// contraction shows up pathwise rather than only in law. mu^0 is the Dirac
// flow of the deterministic drift-only path.
inline PicardResult picard_iterate(const TimeDomain& domain, const DirectionField& field,
                                   const CoefficientSet& cs, const Vec& x0, const TimeGrid& grid,
                                   const NoiseDriver& driver, double noise_scale, std::size_t n_copies,
                                   std::size_t max_iters, double tol, std::size_t workers = 0,
                                   const W2Options& w2opt = {}) {
    if (max_iters < 1) throw Error(ErrorCode::argument, "max_iters must be >= 1");
    if (!(tol > 0.0)) throw Error(ErrorCode::argument, "tol must be positive");

    const ReflectedPath psi = solve_limit_ode(domain, field, cs, x0, grid);
    MeasureFlow current = MeasureFlow::dirac_flow(psi.times, psi.states);

    PicardResult result;
    for (std::size_t k = 0; k < max_iters; ++k) {
        const ParticleEnsemble ens =
            simulate_frozen_law(domain, field, cs, x0, current, grid, driver, noise_scale, n_copies, workers);
        MeasureFlow next = ens.empirical_flow();
        double sup = 0.0;
        for (std::size_t node = 0; node < next.n_nodes(); ++node)
            sup = std::max(sup, wasserstein2(current.at_node(node), next.at_node(node), w2opt).distance);
        result.history.push_back(sup);
        current = std::move(next);
        result.iterations = k + 1;
        if (sup < tol) {
            result.converged = true;
            break;
        }
    }
    result.flow = std::move(current);
    return result;
}

// ---------------------------------------------------------------------------
// Propagation-of-chaos experiment
// ---------------------------------------------------------------------------

struct ChaosRow {
    std::size_t n = 0;
    double mean_sq_dist = 0.0;
    double stderr_sq_dist = 0.0;
};

struct ChaosTable {
    std::vector<ChaosRow> rows;
    std::size_t n_reference = 0;
    bool used_sliced_estimate = false;
};

// For each n, runs n_rep independent interacting ensembles and measures the
// squared sup-over-grid W2 distance to a large reference ensemble (the
// finite-n stand-in for the McKean-Vlasov law).
inline ChaosTable chaos_experiment(const TimeDomain& domain, const DirectionField& field,
                                   const CoefficientSet& cs, const InitialSampler& x0_sampler,
                                   const TimeGrid& grid, const std::vector<std::size_t>& n_list,
                                   std::size_t n_rep, std::uint64_t master_seed,
                                   std::size_t workers = 0, const W2Options& w2opt = {}) {
    if (n_list.empty()) throw Error(ErrorCode::argument, "n_list must not be empty");
    for (std::size_t i = 1; i < n_list.size(); ++i)
        if (n_list[i] <= n_list[i - 1])
            throw Error(ErrorCode::argument, "n_list must be strictly ascending");

    ChaosTable table;
    table.n_reference = 4 * n_list.back();
    const NoiseDriver ref_driver(derive_seed(master_seed, "chaos.reference"));
    const ParticleEnsemble reference = simulate_interacting(domain, field, cs, table.n_reference,
                                                            x0_sampler, grid, ref_driver, 1.0, workers);
    const MeasureFlow ref_flow = reference.empirical_flow();

    for (std::size_t n : n_list) {
        double sum = 0.0, sum_sq = 0.0;
        for (std::size_t rep = 0; rep < n_rep; ++rep) {
            const NoiseDriver run_driver(derive_seed(master_seed, "chaos.run", n * 1000003ULL + rep));
            const ParticleEnsemble ens =
                simulate_interacting(domain, field, cs, n, x0_sampler, grid, run_driver, 1.0, workers);
            double sup_sq = 0.0;
            for (std::size_t node = 0; node < ref_flow.n_nodes(); ++node) {
                const W2Result r = wasserstein2(ens.measure_at_node(node), ref_flow.at_node(node), w2opt);
                if (r.approximate) table.used_sliced_estimate = true;
                sup_sq = std::max(sup_sq, r.distance * r.distance);
            }
            sum += sup_sq;
            sum_sq += sup_sq * sup_sq;
        }
        const double mean = sum / static_cast<double>(n_rep);
        const double var = std::max(0.0, sum_sq / static_cast<double>(n_rep) - mean * mean);
        ChaosRow row;
        row.n = n;
        row.mean_sq_dist = mean;
        row.stderr_sq_dist = n_rep > 1 ? std::sqrt(var / static_cast<double>(n_rep - 1)) : 0.0;
        table.rows.push_back(row);
    }
    return table;
}

} // namespace mvreflect
