#pragma once

#include <cstddef>
#include <vector>

#include "mvreflect/errors.hpp"

namespace mvreflect {

// Uniform grid on [0, T]. Nodes are computed as T*k/n rather than accumulated
// so that node values are identical no matter how the grid is traversed.
struct TimeGrid {
    double horizon = 1.0;
    std::size_t n_steps = 1;

    TimeGrid() = default;
    TimeGrid(double T, std::size_t steps) : horizon(T), n_steps(steps) {
        if (!(T > 0.0) || steps < 1)
            throw Error(ErrorCode::argument, "time grid needs T > 0 and at least one step");
    }

    double dt() const { return horizon / static_cast<double>(n_steps); }
    std::size_t n_nodes() const { return n_steps + 1; }
    double node(std::size_t k) const { return horizon * static_cast<double>(k) / static_cast<double>(n_steps); }

    std::vector<double> nodes() const {
        std::vector<double> t(n_nodes());
        for (std::size_t k = 0; k < t.size(); ++k) t[k] = node(k);
        return t;
    }

    bool operator==(const TimeGrid& o) const {
        return horizon == o.horizon && n_steps == o.n_steps;
    }
};

} // namespace mvreflect
