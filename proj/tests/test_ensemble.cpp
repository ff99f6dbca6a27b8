#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "mvreflect/ensemble.hpp"

using namespace mvreflect;

namespace {

bool paths_bit_equal(const ReflectedPath& a, const ReflectedPath& b) {
    if (a.n_nodes() != b.n_nodes()) return false;
    for (std::size_t k = 0; k < a.n_nodes(); ++k) {
        if (a.states[k] != b.states[k]) return false;
        if (a.local_time[k] != b.local_time[k]) return false;
        if (a.reflector[k] != b.reflector[k]) return false;
    }
    return true;
}

} // namespace

TEST_CASE("noise driver streams") {
    const NoiseDriver driver(123);
    SECTION("reproducible and order-independent") {
        const Vec a = driver.increment(3, 17, 2, 0.01);
        const Vec b = driver.increment(3, 17, 2, 0.01);
        REQUIRE(a == b);
        // Regenerating a late step without touching earlier ones gives the
        // same bits as generating the whole path.
        const TimeGrid grid(1.0, 32);
        const auto path = driver.increments(5, grid, 2);
        REQUIRE(path[20] == driver.increment(5, 20, 2, grid.dt()));
    }
    SECTION("distinct streams decorrelate") {
        const std::size_t n = 4000;
        double sum_xy = 0.0, sum_x = 0.0, sum_y = 0.0, sum_x2 = 0.0, sum_y2 = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double x = driver.increment(0, k, 1, 1.0)[0];
            const double y = driver.increment(1, k, 1, 1.0)[0];
            sum_x += x; sum_y += y; sum_xy += x * y; sum_x2 += x * x; sum_y2 += y * y;
        }
        const double corr = (sum_xy / n - sum_x / n * sum_y / n) /
                            std::sqrt((sum_x2 / n - sum_x / n * sum_x / n) *
                                      (sum_y2 / n - sum_y / n * sum_y / n));
        REQUIRE(std::abs(corr) < 0.05);
        // Marginal variance matches dt.
        REQUIRE(sum_x2 / n == Catch::Approx(1.0).epsilon(0.1));
    }
}

TEST_CASE("single particle without interaction matches the frozen-law run") {
    const auto dom = make_moving_interval(1.0, 0.25, 1.0);
    const auto field = make_normal_field(dom);
    const auto cs = make_preset_coefficients("unit_noise", 1);  // pair term absent
    const TimeGrid grid(1.0, 64);
    const NoiseDriver driver(31);
    const auto interacting = simulate_interacting(dom, field, cs, 1, fixed_start({0.2}), grid, driver, 1.0);
    MeasureFlow any_flow;
    any_flow.times = grid.nodes();
    any_flow.measures.assign(grid.n_nodes(), EmpiricalMeasure::dirac({-0.5}));
    const auto frozen = simulate_frozen_law(dom, field, cs, {0.2}, any_flow, grid, driver, 1.0, 1);
    REQUIRE(paths_bit_equal(interacting.paths[0], frozen.paths[0]));
}

TEST_CASE("two-body mean reversion is symmetric and contracts") {
    const auto dom = make_moving_interval(4.0, 0.0, 1.0);
    const auto field = make_normal_field(dom);
    const auto cs = make_preset_coefficients("mean_reversion", 1);
    const TimeGrid grid(1.0, 100);
    const NoiseDriver driver(1);
    const auto ens = simulate_interacting(
        dom, field, cs, 2, [](std::size_t i) { return Vec{i == 0 ? 0.0 : 2.0}; }, grid, driver, 0.0);
    const double dt = grid.dt();
    for (std::size_t k = 0; k <= 100; ++k) {
        const double x0 = ens.paths[0].states[k][0];
        const double x1 = ens.paths[1].states[k][0];
        REQUIRE(x0 + x1 == Catch::Approx(2.0).margin(1e-12));  // symmetric about 1
        const double gap = std::pow(1.0 - dt, static_cast<double>(k));  // discrete two-body solution
        REQUIRE(1.0 - x0 == Catch::Approx(gap).margin(1e-10));
        REQUIRE(x1 - 1.0 == Catch::Approx(gap).margin(1e-10));
    }
}

TEST_CASE("exchangeability: relabeling particles relabels the ensemble bit for bit") {
    const auto dom = make_moving_interval(1.0, 0.25, 1.0);
    const auto field = make_normal_field(dom);
    const auto cs = make_preset_coefficients("mean_reversion", 1);
    const TimeGrid grid(1.0, 40);
    const NoiseDriver driver(2);
    const std::size_t n = 6;
    const std::vector<double> starts{0.1, -0.3, 0.5, 0.0, 0.7, -0.6};
    const std::vector<std::size_t> perm{4, 2, 0, 5, 1, 3};

    const auto base = simulate_interacting(
        dom, field, cs, n, [&](std::size_t i) { return Vec{starts[i]}; }, grid, driver, 1.0);
    const auto permuted = simulate_interacting(
        dom, field, cs, n, [&](std::size_t i) { return Vec{starts[perm[i]]}; }, grid, driver, 1.0, 0,
        perm);
    for (std::size_t i = 0; i < n; ++i)
        REQUIRE(paths_bit_equal(permuted.paths[i], base.paths[perm[i]]));
}

TEST_CASE("frozen-law copies behave independently") {
    const auto dom = make_moving_interval(2.0, 0.0, 1.0);
    const auto field = make_normal_field(dom);
    const auto cs = make_preset_coefficients("mean_reversion", 1);
    const TimeGrid grid(1.0, 50);
    const NoiseDriver driver(3);
    MeasureFlow flow;
    flow.times = grid.nodes();
    flow.measures.assign(grid.n_nodes(), EmpiricalMeasure::dirac({0.0}));
    const auto ens = simulate_frozen_law(dom, field, cs, {0.0}, flow, grid, driver, 1.0, 256);

    // Pairwise correlation of terminal values across disjoint copy pairs.
    double sx = 0, sy = 0, sxy = 0, sx2 = 0, sy2 = 0;
    const std::size_t pairs = 128;
    for (std::size_t p = 0; p < pairs; ++p) {
        const double x = ens.paths[2 * p].terminal()[0];
        const double y = ens.paths[2 * p + 1].terminal()[0];
        sx += x; sy += y; sxy += x * y; sx2 += x * x; sy2 += y * y;
    }
    const double n = pairs;
    const double corr = (sxy / n - sx / n * sy / n) /
                        std::sqrt((sx2 / n - sx / n * sx / n) * (sy2 / n - sy / n * sy / n));
    REQUIRE(std::abs(corr) < 0.2);
}

TEST_CASE("picard iteration") {
    const auto dom = make_moving_interval(1.0, 0.25, 1.0);
    const auto field = make_normal_field(dom);
    const TimeGrid grid(1.0, 50);
    const NoiseDriver driver(4);

    SECTION("no interaction: the map is constant, the second distance is exactly zero") {
        const auto cs = make_preset_coefficients("unit_noise", 1);
        const auto res = picard_iterate(dom, field, cs, {0.1}, grid, driver, 0.3, 32, 10, 1e-12);
        REQUIRE(res.converged);
        REQUIRE(res.history.size() == 2);
        REQUIRE(res.history.back() == 0.0);
    }
    SECTION("mean reversion contracts with common random numbers") {
        const auto cs = make_preset_coefficients("mean_reversion", 1);
        const auto res = picard_iterate(dom, field, cs, {0.25}, grid, driver, 1.0, 64, 15, 1e-2);
        REQUIRE(res.converged);
        for (std::size_t k = 2; k < res.history.size(); ++k)
            REQUIRE(res.history[k] < res.history[k - 1]);
        REQUIRE(res.history.back() < 1e-2);
        // All fixed-point atoms respect containment node by node.
        for (std::size_t node = 0; node < res.flow.n_nodes(); ++node)
            for (const Vec& atom : res.flow.at_node(node).points())
                REQUIRE(distance(dom, res.flow.times[node], atom) <= dom.boundary_tol());
    }
    SECTION("fixed point agrees with a large interacting run") {
        const auto cs = make_preset_coefficients("mean_reversion", 1);
        const auto res = picard_iterate(dom, field, cs, {0.25}, grid, driver, 1.0, 256, 15, 1e-2);
        const NoiseDriver other(44);
        const auto big = simulate_interacting(dom, field, cs, 512, fixed_start({0.25}), grid, other, 1.0);
        const auto big_flow = big.empirical_flow();
        double sup = 0.0;
        for (std::size_t node = 0; node < grid.n_nodes(); ++node)
            sup = std::max(sup, wasserstein2(res.flow.at_node(node), big_flow.at_node(node)).distance);
        REQUIRE(sup < 0.15);  // both sit within Monte Carlo error of the same law
    }
}

TEST_CASE("chaos experiment") {
    const auto dom = make_moving_interval(1.0, 0.25, 1.0);
    const auto field = make_normal_field(dom);
    const TimeGrid grid(1.0, 40);

    SECTION("deterministic identical particles collapse every distance to zero") {
        const auto cs = make_preset_coefficients("zero", 1);
        const auto table = chaos_experiment(dom, field, cs, fixed_start({0.5}), grid, {2, 4}, 3, 7);
        for (const auto& row : table.rows) {
            REQUIRE(row.mean_sq_dist == Catch::Approx(0.0).margin(1e-24));
            REQUIRE(row.stderr_sq_dist == Catch::Approx(0.0).margin(1e-24));
        }
    }
    SECTION("mean squared distance decreases in n") {
        const auto cs = make_preset_coefficients("mean_reversion", 1);
        const auto table = chaos_experiment(dom, field, cs, fixed_start({0.25}), grid, {8, 64}, 6, 8);
        REQUIRE(table.rows[1].mean_sq_dist < table.rows[0].mean_sq_dist);
    }
    SECTION("quadrupling the repetitions roughly halves the standard error") {
        const auto cs = make_preset_coefficients("mean_reversion", 1);
        const auto small = chaos_experiment(dom, field, cs, fixed_start({0.25}), grid, {16}, 8, 9);
        const auto big = chaos_experiment(dom, field, cs, fixed_start({0.25}), grid, {16}, 32, 9);
        const double ratio = big.rows[0].stderr_sq_dist / small.rows[0].stderr_sq_dist;
        REQUIRE(ratio > 0.35);
        REQUIRE(ratio < 0.65);
    }
}

TEST_CASE("worker count does not change the bits") {
    const auto dom = make_moving_disk(1.0, 0.2, 1.0);
    const auto field = make_rotated_field(dom, 0.4, 0.4);
    const auto cs = make_preset_coefficients("std_vol", 2);
    const TimeGrid grid(1.0, 30);
    const NoiseDriver driver(6);
    const auto a = simulate_interacting(dom, field, cs, 16, fixed_start({0.3, 0.1}), grid, driver, 1.0, 1);
    const auto b = simulate_interacting(dom, field, cs, 16, fixed_start({0.3, 0.1}), grid, driver, 1.0, 4);
    for (std::size_t i = 0; i < 16; ++i) REQUIRE(paths_bit_equal(a.paths[i], b.paths[i]));
}
