#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "mvreflect/geometry.hpp"
#include "mvreflect/rng.hpp"

using namespace mvreflect;

namespace {

// Independent distance oracle: dense sampling of the section.
double sampled_distance_interval(double r, double x, int n = 400000) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= n; ++i) {
        const double y = -r + 2.0 * r * i / n;
        best = std::min(best, std::abs(x - y));
    }
    return best;
}

// Independent boundary oracle in 1-D: bisect the segment from x toward an
// interior point for the d > 0 -> d = 0 crossing.
double bisect_boundary_oracle(const TimeDomain& dom, double t, double x, double x_interior) {
    double lo = x, hi = x_interior;  // d(lo) > 0, d(hi) = 0
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (dom.dist(t, {mid}) > 0.0) lo = mid; else hi = mid;
    }
    return hi;
}

} // namespace

TEST_CASE("distance on the moving interval") {
    const auto dom = make_moving_interval(1.0, 0.25, 1.0);

    SECTION("interior point is at distance zero") {
        REQUIRE(distance(dom, 0.0, {0.5}) == 0.0);
    }
    SECTION("exterior point at t = 0 against the sampling oracle") {
        const double d = distance(dom, 0.0, {1.5});
        REQUIRE(d == Catch::Approx(0.5).margin(1e-12));
        REQUIRE(d == Catch::Approx(sampled_distance_interval(1.0, 1.5)).margin(1e-5));
    }
    SECTION("the section moves: r(0.25) = 1.25") {
        const double d = distance(dom, 0.25, {1.5});
        REQUIRE(d == Catch::Approx(0.25).margin(1e-12));
        REQUIRE(d == Catch::Approx(sampled_distance_interval(1.25, 1.5)).margin(1e-5));
    }
    SECTION("time outside the horizon is rejected") {
        REQUIRE_THROWS_AS(distance(dom, 1.5, {0.0}), Error);
        REQUIRE_THROWS_AS(distance(dom, -0.1, {0.0}), Error);
    }
}

TEST_CASE("distance is 1-Lipschitz in space") {
    const auto dom = make_moving_disk(1.0, 0.2, 1.0);
    CounterRng rng(7);
    for (int i = 0; i < 500; ++i) {
        const double t = rng.uniform(0.0, 1.0);
        Vec x{rng.uniform(-3, 3), rng.uniform(-3, 3)};
        Vec y{rng.uniform(-3, 3), rng.uniform(-3, 3)};
        REQUIRE(std::abs(distance(dom, t, x) - distance(dom, t, y)) <= dist(x, y) + 1e-12);
    }
}

TEST_CASE("nearest boundary point") {
    SECTION("exterior point on the interval, against the bisection oracle") {
        const auto dom = make_moving_interval(1.0, 0.25, 1.0);
        const auto anchor = nearest_boundary(dom, 0.0, {1.5});
        const double oracle = bisect_boundary_oracle(dom, 0.0, 1.5, 0.0);
        REQUIRE(anchor.point[0] == Catch::Approx(oracle).margin(1e-7));
        REQUIRE(anchor.point[0] == Catch::Approx(1.0).margin(1e-7));
        REQUIRE(distance(dom, 0.0, anchor.point) <= dom.boundary_tol());
    }
    SECTION("radial symmetry on the static disk") {
        const auto dom = make_moving_disk(1.0, 0.0, 1.0);
        const auto anchor = nearest_boundary(dom, 0.3, {2.0, 0.0});
        REQUIRE(anchor.point[0] == Catch::Approx(1.0).margin(1e-7));
        REQUIRE(std::abs(anchor.point[1]) < 1e-7);
    }
    SECTION("interior point: directional search picks the near side") {
        const auto dom = make_moving_interval(1.0, 0.25, 1.0);
        const auto anchor = nearest_boundary(dom, 0.0, {0.9});
        REQUIRE(anchor.point[0] == Catch::Approx(1.0).margin(1e-6));
    }
    SECTION("idempotence on returned anchors") {
        const auto dom = make_moving_disk(1.0, 0.1, 1.0);
        CounterRng rng(11);
        for (int i = 0; i < 30; ++i) {
            Vec x{rng.uniform(-2, 2), rng.uniform(-2, 2)};
            const double t = rng.uniform(0.0, 1.0);
            const auto a1 = nearest_boundary(dom, t, x);
            const auto a2 = nearest_boundary(dom, t, a1.point);
            REQUIRE(dist(a1.point, a2.point) <= 10.0 * dom.boundary_tol());
        }
    }
    SECTION("anchor outward probe leaves the domain") {
        const auto dom = make_moving_interval(1.0, 0.25, 1.0);
        const auto anchor = nearest_boundary(dom, 0.0, {1.5});
        Vec outward = anchor.inward_hint;
        for (double& v : outward) v = -v;
        Vec probe = anchor.point;
        axpy(probe, 1e-4, outward);
        REQUIRE(distance(dom, 0.0, probe) > 0.0);
    }
}

TEST_CASE("cone condition validation") {
    SECTION("interval with the inward normal passes") {
        const auto dom = make_moving_interval(1.0, 0.25, 1.0);
        const auto field = make_normal_field(dom, 0.5);
        const auto report = validate_cone_condition(dom, field, 200, 1);
        REQUIRE(report.n_anchors > 150);
        REQUIRE(report.ok());
    }
    SECTION("disk with the normal rotated by 30 degrees passes") {
        // Plane geometry: for a disk of radius r any cone point satisfies
        // ||x - xi*gamma|| - xi*rho >= r + xi (cos(30deg) - rho) > r.
        const double margin = std::cos(std::numbers::pi / 6.0) - 0.4;
        REQUIRE(margin > 0.0);
        const auto dom = make_moving_disk(1.0, 0.0, 1.0);
        const auto field = make_rotated_field(dom, std::numbers::pi / 6.0, 0.4);
        const auto report = validate_cone_condition(dom, field, 200, 2);
        REQUIRE(report.ok());
    }
    SECTION("outward field is flagged") {
        const auto dom = make_moving_disk(1.0, 0.0, 1.0);
        const auto field = make_outward_field(dom, 0.4);
        const auto report = validate_cone_condition(dom, field, 100, 3);
        REQUIRE(!report.violations.empty());
    }
    SECTION("every built-in pair passes at modest sample counts") {
        const auto interval = make_moving_interval(1.0, 0.25, 1.0);
        const auto disk = make_moving_disk(1.0, 0.2, 1.0);
        const auto box = make_moving_box({1.0, 0.8}, 0.2, 0.1, 1.0);
        REQUIRE(validate_cone_condition(interval, make_normal_field(interval, 0.5), 100, 4).ok());
        REQUIRE(validate_cone_condition(disk, make_normal_field(disk, 0.5), 100, 5).ok());
        REQUIRE(validate_cone_condition(disk, make_rotated_field(disk, std::numbers::pi / 6.0, 0.4), 100, 6).ok());
        REQUIRE(validate_cone_condition(box, make_normal_field(box, 0.4), 100, 7).ok());
    }
}

TEST_CASE("time regularity probe") {
    SECTION("static disk has zero quotient") {
        auto dom = make_moving_disk(1.0, 0.0, 1.0);
        const auto report = validate_time_regularity(dom, 50, 1.0 / 128.0, 1);
        REQUIRE(report.max_quotient == 0.0);
        REQUIRE(report.ok);
    }
    SECTION("breathing interval stays below the declared bound") {
        const auto dom = make_moving_interval(1.0, 0.25, 1.0);
        REQUIRE(dom.time_lipschitz_bound == Catch::Approx(0.5 * std::numbers::pi));
        const auto report = validate_time_regularity(dom, 100, 1.0 / 256.0, 2);
        REQUIRE(report.ok);
        REQUIRE(report.max_quotient <= 0.5 * std::numbers::pi + 1e-9);
        // An exterior probe point sees the full boundary speed.
        double q_ext = 0.0;
        const double dt = 1.0 / 256.0;
        for (double t = 0.0; t + dt <= 1.0; t += dt)
            q_ext = std::max(q_ext, std::abs(dom.dist(t + dt, {2.0}) - dom.dist(t, {2.0})) / dt);
        REQUIRE(q_ext > 0.9 * 0.5 * std::numbers::pi);
    }
    SECTION("deep interior point never moves") {
        const auto dom = make_moving_interval(1.0, 0.25, 1.0);
        const double dt = 1.0 / 64.0;
        for (double t = 0.0; t + dt <= 1.0; t += dt)
            REQUIRE(dom.dist(t, {0.0}) == 0.0);
    }
}

TEST_CASE("rounded box distance matches its closed form") {
    const auto box = make_moving_box({1.0, 0.8}, 0.2, 0.0, 1.0);
    // Face region: distance reduces to the axis gap.
    REQUIRE(distance(box, 0.0, {1.5, 0.0}) == Catch::Approx(0.5).margin(1e-12));
    // Corner region: distance to the rounded corner arc.
    const double dx = 1.5 - 0.8, dy = 1.2 - 0.6;  // offsets to the core corner
    const double expect = std::sqrt(dx * dx + dy * dy) - 0.2;
    REQUIRE(distance(box, 0.0, {1.5, 1.2}) == Catch::Approx(expect).margin(1e-12));
    REQUIRE(distance(box, 0.0, {0.5, 0.3}) == 0.0);
}
