#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "mvreflect/ensemble.hpp"
#include "mvreflect/reflection.hpp"

using namespace mvreflect;

namespace {

TimeDomain shrinking_interval(double rate, double horizon) {
    TimeDomain d;
    d.horizon = horizon;
    d.dim = 1;
    d.bounding_radius = 1.0;
    d.time_lipschitz_bound = rate;
    d.name = "shrinking_interval";
    d.dist = [rate](double t, const Vec& x) { return std::max(0.0, std::abs(x[0]) - (1.0 - rate * t)); };
    d.inward_normal = [](double, const Vec& x) -> Vec {
        if (x[0] > 0.0) return {-1.0};
        if (x[0] < 0.0) return {1.0};
        return {0.0};
    };
    return d;
}

MeasureFlow dirac_flow_at(const TimeGrid& grid, const Vec& p) {
    MeasureFlow f;
    f.times = grid.nodes();
    f.measures.assign(grid.n_nodes(), EmpiricalMeasure::dirac(p));
    return f;
}

} // namespace

TEST_CASE("oblique projection") {
    const auto interval = make_moving_interval(1.0, 0.0, 1.0);
    const auto normal = make_normal_field(interval, 0.5);

    SECTION("interior points are untouched") {
        const auto r = oblique_project(interval, normal, 0.0, {0.5});
        REQUIRE(r.point[0] == 0.5);
        REQUIRE(r.xi == 0.0);
        REQUIRE(r.displacement == Vec{0.0});
    }
    SECTION("1-D push to the boundary") {
        const auto r = oblique_project(interval, normal, 0.0, {1.2});
        REQUIRE(r.point[0] == Catch::Approx(1.0).margin(1e-8));
        REQUIRE(r.xi == Catch::Approx(0.2).margin(1e-8));
        REQUIRE(distance(interval, 0.0, r.point) <= interval.boundary_tol());
    }
    SECTION("oblique entry into the disk matches the quadratic-root oracle") {
        const auto disk = make_moving_disk(1.0, 0.0, 1.0);
        const auto rotated = make_rotated_field(disk, std::numbers::pi / 6.0, 0.4);
        // Root of (1.2 - xi cos30)^2 + (xi sin30)^2 = 1, smaller branch.
        const double c = std::cos(std::numbers::pi / 6.0);
        const double xi_oracle = 1.2 * c - std::sqrt(1.44 * c * c - 0.44);
        const auto r = oblique_project(disk, rotated, 0.0, {1.2, 0.0});
        REQUIRE(r.xi == Catch::Approx(xi_oracle).margin(1e-6));
        REQUIRE(norm(r.point) == Catch::Approx(1.0).margin(1e-6));
        REQUIRE(distance(disk, 0.0, r.point) <= disk.boundary_tol());
    }
    SECTION("incompatible field fails with the projection error") {
        const auto disk = make_moving_disk(1.0, 0.0, 1.0);
        const auto outward = make_outward_field(disk, 0.4);
        try {
            oblique_project(disk, outward, 0.0, {1.5, 0.0});
            FAIL("expected a projection failure");
        } catch (const Error& e) {
            REQUIRE(e.code() == ErrorCode::projection_failure);
        }
    }
}

TEST_CASE("constrained Euler step") {
    const auto zero = make_preset_coefficients("zero", 1);
    const auto mu = EmpiricalMeasure::dirac({0.0});

    SECTION("no coefficients, static domain: only time advances") {
        const auto dom = make_moving_interval(1.0, 0.0, 1.0);
        const auto field = make_normal_field(dom);
        ReflectedState st{{0.3}, 0.0, {0.0}, 0.0};
        const auto next = constrained_euler_step(dom, field, zero, st, mu, 0.25, {0.0}, 0.0);
        REQUIRE(next.x == st.x);
        REQUIRE(next.local_time == 0.0);
        REQUIRE(next.t == 0.25);
    }
    SECTION("domain motion alone generates reflection") {
        const auto dom = shrinking_interval(0.1, 1.0);  // r(1) = 0.9
        const auto field = make_normal_field(dom);
        ReflectedState st{{0.95}, 0.0, {0.0}, 0.0};
        const auto next = constrained_euler_step(dom, field, zero, st, mu, 1.0, {0.0}, 0.0);
        REQUIRE(next.x[0] == Catch::Approx(0.9).margin(1e-8));
        REQUIRE(next.local_time == Catch::Approx(0.05).margin(1e-8));
    }
    SECTION("drift into the wall: hand arithmetic") {
        CoefficientSet cs = make_preset_coefficients("zero", 1);
        cs.drift = [](double, const Vec&, const EmpiricalMeasure&) { return Vec{2.0}; };
        const auto dom = make_moving_interval(1.0, 0.0, 1.0);
        const auto field = make_normal_field(dom);
        ReflectedState st{{0.99}, 0.0, {0.0}, 0.0};
        const auto next = constrained_euler_step(dom, field, cs, st, mu, 0.01, {0.0}, 0.0);
        REQUIRE(next.x[0] == Catch::Approx(1.0).margin(1e-8));
        REQUIRE(next.local_time == Catch::Approx(0.01).margin(1e-8));
        REQUIRE(next.reflector[0] == Catch::Approx(-0.01).margin(1e-8));
    }
}

TEST_CASE("drive_path") {
    SECTION("zero dynamics give a constant path with zero local time") {
        const auto dom = make_moving_interval(1.0, 0.0, 1.0);
        const auto field = make_normal_field(dom);
        const auto zero = make_preset_coefficients("zero", 1);
        const TimeGrid grid(1.0, 50);
        const auto flow = dirac_flow_at(grid, {0.0});
        std::vector<Vec> noise(grid.n_steps, Vec{0.0});
        const auto path = drive_path(dom, field, zero, {0.4}, flow, grid, noise, 0.0);
        for (const auto& x : path.states) REQUIRE(x[0] == 0.4);
        REQUIRE(path.local_time.back() == 0.0);
    }
    SECTION("boundary sticking accrues local time at the drift rate") {
        CoefficientSet cs = make_preset_coefficients("zero", 1);
        cs.drift = [](double, const Vec&, const EmpiricalMeasure&) { return Vec{1.0}; };
        TimeDomain dom = make_moving_interval(1.0, 0.0, 2.0);
        const auto field = make_normal_field(dom);
        const TimeGrid grid(2.0, 200);
        const auto flow = dirac_flow_at(grid, {0.0});
        std::vector<Vec> noise(grid.n_steps, Vec{0.0});
        const auto path = drive_path(dom, field, cs, {0.0}, flow, grid, noise, 0.0);
        // The path climbs to 1 at t = 1 and sticks there.
        REQUIRE(path.states.back()[0] == Catch::Approx(1.0).margin(1e-8));
        const std::size_t node_t1 = 100;
        REQUIRE(path.states[node_t1][0] == Catch::Approx(1.0).margin(1e-8));
        const double accrued = path.local_time.back() - path.local_time[node_t1];
        REQUIRE(accrued == Catch::Approx(1.0).margin(2.0 * grid.dt()));
    }
    SECTION("deterministic: identical inputs give identical bits") {
        const auto dom = make_moving_interval(1.0, 0.25, 1.0);
        const auto field = make_normal_field(dom);
        const auto cs = make_preset_coefficients("mean_reversion", 1);
        const TimeGrid grid(1.0, 64);
        const auto flow = dirac_flow_at(grid, {0.2});
        const NoiseDriver driver(5);
        const auto noise = driver.increments(0, grid, 1);
        const auto a = drive_path(dom, field, cs, {0.2}, flow, grid, noise, 1.0);
        const auto b = drive_path(dom, field, cs, {0.2}, flow, grid, noise, 1.0);
        for (std::size_t k = 0; k < a.n_nodes(); ++k) {
            REQUIRE(a.states[k] == b.states[k]);
            REQUIRE(a.local_time[k] == b.local_time[k]);
        }
    }
    SECTION("halving dt: self-difference shrinks at the scheme order") {
        const auto dom = make_moving_interval(1.0, 0.25, 2.0);
        const auto field = make_normal_field(dom);
        const auto cs = make_preset_coefficients("mean_reversion", 1);
        const std::size_t base_steps = 64;
        const NoiseDriver driver(77);

        auto run_at = [&](std::size_t refine, double noise_scale, std::size_t particle) {
            const TimeGrid grid(2.0, base_steps * refine);
            // Aggregate the finest-grid increments so all resolutions share
            // one Brownian path.
            const TimeGrid fine(2.0, base_steps * 8);
            const auto fine_noise = driver.increments(particle, fine, 1);
            std::vector<Vec> noise(grid.n_steps, Vec{0.0});
            const std::size_t ratio = (base_steps * 8) / grid.n_steps;
            for (std::size_t k = 0; k < fine.n_steps; ++k) noise[k / ratio][0] += fine_noise[k][0];
            const auto flow = dirac_flow_at(grid, {0.2});
            return drive_path(dom, field, cs, {0.8}, flow, grid, noise, noise_scale);
        };
        auto sup_diff = [&](const ReflectedPath& coarse, const ReflectedPath& fine) {
            const std::size_t ratio = (fine.n_nodes() - 1) / (coarse.n_nodes() - 1);
            double sup = 0.0;
            for (std::size_t k = 0; k < coarse.n_nodes(); ++k)
                sup = std::max(sup, std::abs(coarse.states[k][0] - fine.states[k * ratio][0]));
            return sup;
        };

        // sigma = 0: smooth first-order behavior, dyadic ratio near 2.
        {
            const auto a = run_at(1, 0.0, 0);
            const auto b = run_at(2, 0.0, 0);
            const auto c = run_at(4, 0.0, 0);
            REQUIRE(sup_diff(a, b) / sup_diff(b, c) == Catch::Approx(2.0).epsilon(0.25));
        }
        // sigma > 0: reflection caps the strong order near 1/2 and sup-norm
        // differences are heavy-tailed, so assert the averaged decay rather
        // than a per-level ratio window.
        double d1 = 0.0, d2 = 0.0, d3 = 0.0;
        const std::size_t n_paths = 48;
        for (std::size_t p = 0; p < n_paths; ++p) {
            const auto a = run_at(1, 1.0, p);
            const auto b = run_at(2, 1.0, p);
            const auto c = run_at(4, 1.0, p);
            const auto d = run_at(8, 1.0, p);
            d1 += sup_diff(a, b);
            d2 += sup_diff(b, c);
            d3 += sup_diff(c, d);
        }
        REQUIRE(d1 > d2);
        REQUIRE(d2 > d3);
        REQUIRE(d1 / d3 > 1.7);  // consistent with order >= 1/2 over a 4x refinement
    }
}

TEST_CASE("reflection invariants along noisy runs") {
    const auto dom = make_moving_disk(1.0, 0.2, 1.0);
    const auto field = make_rotated_field(dom, std::numbers::pi / 6.0, 0.4);
    auto cs = make_preset_coefficients("mean_reversion", 2);
    const TimeGrid grid(1.0, 100);
    const NoiseDriver driver(9);
    const auto ens = simulate_interacting(dom, field, cs, 12, fixed_start({0.5, 0.0}), grid, driver, 2.0);

    std::size_t reflected_steps = 0;
    for (const auto& path : ens.paths) {
        for (std::size_t k = 0; k < grid.n_nodes(); ++k)
            REQUIRE(distance(dom, grid.node(k), path.states[k]) <= dom.boundary_tol());
        for (std::size_t k = 0; k < grid.n_steps; ++k) {
            REQUIRE(path.local_time[k + 1] >= path.local_time[k]);
            const double dk = dist(path.reflector[k + 1], path.reflector[k]);
            REQUIRE(dk <= path.xi_steps[k] + 1e-12);
            if (path.xi_steps[k] > 0.0) {
                ++reflected_steps;
                // Support condition: the step lands next to the boundary.
                const double r = 1.0 + 0.2 * std::sin(2.0 * std::numbers::pi * grid.node(k + 1));
                REQUIRE(std::abs(norm(path.states[k + 1]) - r) <= 2.0 * dom.boundary_tol());
            }
        }
    }
    REQUIRE(reflected_steps > 0);  // the scaled-up noise must actually hit the wall
}

TEST_CASE("interior steps carry no local time") {
    const auto dom = make_moving_interval(4.0, 0.0, 1.0);
    const auto field = make_normal_field(dom);
    const auto cs = make_preset_coefficients("mean_reversion", 1);
    const TimeGrid grid(1.0, 50);
    const NoiseDriver driver(13);
    const auto ens = simulate_interacting(dom, field, cs, 8, fixed_start({0.1}), grid, driver, 1.0);
    for (const auto& path : ens.paths) {
        REQUIRE(path.local_time.back() == 0.0);
        for (std::size_t k = 0; k < grid.n_nodes(); ++k) REQUIRE(std::abs(path.states[k][0]) < 3.9);
    }
}
