#pragma once

#include <cstdint>
#include <vector>

#include "mvreflect/grid.hpp"
#include "mvreflect/measures.hpp"

namespace mvreflect {

// One reflected trajectory on a time grid: state, cumulative local time |K|,
// reflector K, and the per-step local-time increments xi.
struct ReflectedPath {
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<double> local_time;   // |K| at each node, nondecreasing
    std::vector<Vec> reflector;       // K at each node
    std::vector<double> xi_steps;     // local-time increment per step (n_steps entries)

    std::size_t n_nodes() const { return times.size(); }
    const Vec& terminal() const { return states.back(); }

    double sup_distance(const ReflectedPath& other, std::size_t up_to_node) const {
        double s = 0.0;
        for (std::size_t k = 0; k <= up_to_node && k < states.size(); ++k)
            s = std::max(s, dist(states[k], other.states[k]));
        return s;
    }
};

// n trajectories on a shared grid plus the per-particle stream keys that
// drove them.
struct ParticleEnsemble {
    TimeGrid grid;
    std::vector<ReflectedPath> paths;
    std::vector<std::uint64_t> seeds;

    std::size_t size() const { return paths.size(); }

    EmpiricalMeasure measure_at_node(std::size_t k) const {
        std::vector<Vec> pts;
        pts.reserve(paths.size());
        for (const auto& p : paths) pts.push_back(p.states.at(k));
        return EmpiricalMeasure::uniform(std::move(pts));
    }

    MeasureFlow empirical_flow() const {
        MeasureFlow f;
        f.times = grid.nodes();
        f.measures.reserve(f.times.size());
        for (std::size_t k = 0; k < f.times.size(); ++k) f.measures.push_back(measure_at_node(k));
        return f;
    }
};

} // namespace mvreflect
