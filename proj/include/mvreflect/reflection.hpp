#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mvreflect/coefficients.hpp"
#include "mvreflect/geometry.hpp"
#include "mvreflect/path.hpp"

namespace mvreflect {

inline constexpr int max_project_iters = 200;

// State of one reflected trajectory between steps.
struct ReflectedState {
    Vec x;
    double local_time = 0.0;  // |K|_t
    Vec reflector;            // K_t
    double t = 0.0;
};

struct ProjectionResult {
    Vec point;
    double xi = 0.0;    // arc length traveled along the direction field
    Vec displacement;   // net push, sum of the sub-step moves; |displacement| <= xi
};

// Pushes an exterior point back into the time-t section along the oblique
// field. Each sub-step freezes gamma at the current nearest-boundary anchor
// and solves the 1-D crossing along it by bracketing plus bisection; the
// budget max_iters covers all probes and halvings together.
inline ProjectionResult oblique_project(const TimeDomain& domain, const DirectionField& field,
                                        double t, const Vec& x, int max_iters = max_project_iters) {
    const double tol = domain.boundary_tol();
    if (distance(domain, t, x) <= tol)
        return ProjectionResult{x, 0.0, zeros(x.size())};

    Vec cur = x;
    double xi = 0.0;
    int budget = max_iters;
    Vec probe(x.size());

    auto dist_along = [&](const Vec& g, double s) {
        for (std::size_t i = 0; i < probe.size(); ++i) probe[i] = cur[i] + s * g[i];
        return domain.dist(t, probe);
    };

    while (true) {
        const double d_cur = domain.dist(t, cur);
        if (d_cur <= tol) break;

        const BoundaryAnchor anchor = nearest_boundary(domain, t, cur);
        const Vec g = field.gamma(t, anchor.point);
        if (norm(g) < 0.5) {
            throw Error(ErrorCode::projection_failure,
                        "degenerate reflection direction at the boundary anchor");
        }

        // Bracket the first entry point along the frozen direction.
        double s_hi = std::max(d_cur, 16.0 * tol);
        const double s_max = 2.0 * (norm(cur) + domain.bounding_radius);
        bool inside_found = false;
        while (budget-- > 0) {
            if (dist_along(g, s_hi) <= 0.0) { inside_found = true; break; }
            s_hi *= 2.0;
            if (s_hi > s_max) break;
        }
        if (!inside_found) {
            if (budget <= 0)
                throw Error(ErrorCode::projection_failure,
                            "projection exceeded max iterations; gamma and the domain are incompatible");
            // The frozen direction misses the section entirely; a compatible
            // field never does this from at or outside the boundary.
            throw Error(ErrorCode::projection_failure,
                        "no entry point along gamma within the bounding radius");
        }

        double s_lo = 0.0;
        while (s_hi - s_lo > tol && budget-- > 0) {
            const double mid = 0.5 * (s_lo + s_hi);
            if (dist_along(g, mid) > 0.0) s_lo = mid; else s_hi = mid;
        }
        if (budget <= 0)
            throw Error(ErrorCode::projection_failure, "projection exceeded max iterations");

        axpy(cur, s_hi, g);
        xi += s_hi;
    }

    Vec displacement = cur - x;
    return ProjectionResult{std::move(cur), xi, std::move(displacement)};
}

// One explicit Euler step followed by projection against the section at the
// post-step time, so that domain motion itself generates reflection. The
// reflector accumulates the net push (whose norm never exceeds the
// local-time increment since ||gamma|| <= 1).
inline ReflectedState constrained_euler_step(const TimeDomain& domain, const DirectionField& field,
                                             const CoefficientSet& cs, const ReflectedState& state,
                                             const EmpiricalMeasure& mu, double dt, const Vec& dw,
                                             double noise_scale) {
    if (!(dt > 0.0)) throw Error(ErrorCode::argument, "dt must be positive");
    if (dw.size() != cs.noise_dim) throw Error(ErrorCode::shape, "noise increment dimension mismatch");

    const double t_new = state.t + dt;
    Vec y = state.x;
    axpy(y, dt, eval_drift(cs, state.t, state.x, mu));
    if (noise_scale != 0.0)
        add_mat_vec(y, noise_scale, eval_diffusion(cs, state.t, state.x, mu), dw);

    const ProjectionResult proj = oblique_project(domain, field, t_new, y);

    ReflectedState next;
    next.x = proj.point;
    next.t = t_new;
    next.local_time = state.local_time + proj.xi;
    next.reflector = state.reflector;
    next.reflector += proj.displacement;
    return next;
}

// Deterministic limit dynamics: constrained Euler with zero noise and the
// running Dirac at the current state as the law argument.
inline ReflectedPath solve_limit_ode(const TimeDomain& domain, const DirectionField& field,
                                     const CoefficientSet& cs, const Vec& x0, const TimeGrid& grid) {
    if (distance(domain, 0.0, x0) > domain.boundary_tol())
        throw Error(ErrorCode::argument, "initial state lies outside the closed section at t = 0");

    ReflectedPath path;
    path.times = grid.nodes();
    path.states.push_back(x0);
    path.local_time.push_back(0.0);
    path.reflector.push_back(zeros(x0.size()));

    Vec x = x0;
    double local_time = 0.0;
    Vec reflector = zeros(x0.size());
    for (std::size_t k = 0; k < grid.n_steps; ++k) {
        const double t = grid.node(k);
        const double dt = grid.node(k + 1) - grid.node(k);
        Vec y = x;
        axpy(y, dt, eval_drift(cs, t, x, EmpiricalMeasure::dirac(x)));
        const ProjectionResult proj = oblique_project(domain, field, grid.node(k + 1), y);
        x = proj.point;
        local_time += proj.xi;
        reflector += proj.displacement;
        path.states.push_back(x);
        path.local_time.push_back(local_time);
        path.reflector.push_back(reflector);
        path.xi_steps.push_back(proj.xi);
    }
    return path;
}

// Folds constrained steps over the grid with the measure flow frozen, one
// measure per step-start node.
inline ReflectedPath drive_path(const TimeDomain& domain, const DirectionField& field,
                                const CoefficientSet& cs, const Vec& x0, const MeasureFlow& flow,
                                const TimeGrid& grid, const std::vector<Vec>& noise_increments,
                                double noise_scale) {
    if (flow.n_nodes() != grid.n_nodes())
        throw Error(ErrorCode::argument, "measure flow does not match the grid");
    if (noise_increments.size() < grid.n_steps)
        throw Error(ErrorCode::argument, "noise path shorter than the grid");
    if (distance(domain, 0.0, x0) > domain.boundary_tol())
        throw Error(ErrorCode::argument, "initial state lies outside the closed section at t = 0");

    ReflectedPath path;
    path.times = grid.nodes();
    path.states.reserve(grid.n_nodes());
    path.local_time.reserve(grid.n_nodes());
    path.reflector.reserve(grid.n_nodes());
    path.xi_steps.reserve(grid.n_steps);

    ReflectedState st;
    st.x = x0;
    st.reflector = zeros(x0.size());
    st.t = 0.0;
    path.states.push_back(st.x);
    path.local_time.push_back(0.0);
    path.reflector.push_back(st.reflector);

    for (std::size_t k = 0; k < grid.n_steps; ++k) {
        const double dt = grid.node(k + 1) - grid.node(k);
        try {
            ReflectedState next = constrained_euler_step(domain, field, cs, st, flow.at_node(k),
                                                         dt, noise_increments[k], noise_scale);
            next.t = grid.node(k + 1);
            path.xi_steps.push_back(next.local_time - st.local_time);
            st = std::move(next);
        } catch (const Error& e) {
            throw Error(e.code(), std::string(e.what()) + " (step " + std::to_string(k) + ")");
        }
        path.states.push_back(st.x);
        path.local_time.push_back(st.local_time);
        path.reflector.push_back(st.reflector);
    }
    return path;
}

} // namespace mvreflect
