#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mvreflect/ensemble.hpp"

namespace mvreflect {

// ---------------------------------------------------------------------------
// Controls and the rate functional
// ---------------------------------------------------------------------------

// Piecewise-constant control on the simulation grid, one R^m value per
// interval, with energy  1/2 sum ||h_k||^2 dt_k.
struct Control {
    TimeGrid grid;
    std::vector<Vec> values;

    static Control zero(const TimeGrid& grid, std::size_t m) {
        Control h;
        h.grid = grid;
        h.values.assign(grid.n_steps, zeros(m));
        return h;
    }

    static Control constant(const TimeGrid& grid, Vec value) {
        Control h;
        h.grid = grid;
        h.values.assign(grid.n_steps, value);
        return h;
    }

    std::size_t noise_dim() const { return values.empty() ? 0 : values[0].size(); }

    bool interval_is_zero(std::size_t k) const {
        for (double v : values[k])
            if (v != 0.0) return false;
        return true;
    }

    bool is_zero() const {
        for (std::size_t k = 0; k < values.size(); ++k)
            if (!interval_is_zero(k)) return false;
        return true;
    }

    double energy() const {
        double e = 0.0;
        for (std::size_t k = 0; k < values.size(); ++k)
            e += 0.5 * dot(values[k], values[k]) * (grid.node(k + 1) - grid.node(k));
        return e;
    }

    void validate() const {
        if (values.size() != grid.n_steps)
            throw Error(ErrorCode::argument, "control has wrong number of intervals");
        for (const Vec& v : values)
            for (double x : v)
                if (!std::isfinite(x)) throw Error(ErrorCode::argument, "control values must be finite");
    }
};

inline double rate_functional(const Control& h) {
    h.validate();
    return h.energy();
}

// ---------------------------------------------------------------------------
// Skeleton equation
// ---------------------------------------------------------------------------

// Deterministic controlled dynamics with the law argument frozen at the
// Dirac flow of psi: drift b(t, Y, delta_psi) + sigma(t, Y, delta_psi) h(t),
// reflected like everything else. With h = 0 this reproduces
// solve_limit_ode step for step.
inline ReflectedPath solve_skeleton(const TimeDomain& domain, const DirectionField& field,
                                    const CoefficientSet& cs, const Vec& x0, const ReflectedPath& psi,
                                    const Control& h) {
    h.validate();
    const TimeGrid& grid = h.grid;
    if (psi.n_nodes() != grid.n_nodes())
        throw Error(ErrorCode::argument, "psi path does not match the control grid");
    if (h.noise_dim() != cs.noise_dim)
        throw Error(ErrorCode::shape, "control dimension does not match the noise dimension");
    if (distance(domain, 0.0, x0) > domain.boundary_tol())
        throw Error(ErrorCode::argument, "initial state lies outside the closed section at t = 0");

    ReflectedPath path;
    path.times = grid.nodes();
    path.states.push_back(x0);
    path.local_time.push_back(0.0);
    path.reflector.push_back(zeros(x0.size()));

    Vec y = x0;
    double local_time = 0.0;
    Vec reflector = zeros(x0.size());
    for (std::size_t k = 0; k < grid.n_steps; ++k) {
        const double t = grid.node(k);
        const double dt = grid.node(k + 1) - grid.node(k);
        const EmpiricalMeasure law = EmpiricalMeasure::dirac(psi.states[k]);
        Vec drift = eval_drift(cs, t, y, law);
        if (!h.interval_is_zero(k))
            add_mat_vec(drift, 1.0, eval_diffusion(cs, t, y, law), h.values[k]);
        Vec tentative = y;
        axpy(tentative, dt, drift);
        const ProjectionResult proj = oblique_project(domain, field, grid.node(k + 1), tentative);
        y = proj.point;
        local_time += proj.xi;
        reflector += proj.displacement;
        path.states.push_back(y);
        path.local_time.push_back(local_time);
        path.reflector.push_back(reflector);
        path.xi_steps.push_back(proj.xi);
    }
    return path;
}

// ---------------------------------------------------------------------------
// Rate estimation by quadratic penalty with continuation
// ---------------------------------------------------------------------------

struct RateTarget {
    // Nonnegative; zero exactly when the path meets the target.
    std::function<double(const ReflectedPath&)> violation;
    std::string label;
};

inline RateTarget target_path(ReflectedPath phi) {
    RateTarget t;
    t.label = "path";
    t.violation = [phi = std::move(phi)](const ReflectedPath& y) {
        double sup = 0.0;
        for (std::size_t k = 0; k < y.states.size(); ++k)
            sup = std::max(sup, dist(y.states[k], phi.states[k]));
        return sup;
    };
    return t;
}

inline RateTarget target_terminal_point(Vec p) {
    RateTarget t;
    t.label = "terminal_point";
    t.violation = [p = std::move(p)](const ReflectedPath& y) { return dist(y.terminal(), p); };
    return t;
}

// Terminal escape set {|Y_T - origin| >= a}, the closure of a rare event.
inline RateTarget target_terminal_escape(Vec origin, double a) {
    RateTarget t;
    t.label = "terminal_escape";
    t.violation = [origin = std::move(origin), a](const ReflectedPath& y) {
        return std::max(0.0, a - dist(y.terminal(), origin));
    };
    return t;
}

struct RateOptions {
    double feasibility_tol = 1e-3;   // sup-norm feasibility for a finite value
    double energy_ceiling = 1e3;
    double penalty_init = 10.0;
    double penalty_growth = 10.0;
    std::size_t stages = 6;
    std::size_t max_inner_iters = 200;
    double fd_step = 1e-5;
};

struct RateValue {
    bool infinite = false;
    double value = std::numeric_limits<double>::infinity();
    std::optional<Control> witness;      // present iff finite
    double feasibility = 0.0;            // final violation (sup norm)
    std::size_t stages_used = 0;
};

// Upper-bound estimate of the rate I(target) = inf { energy(h) : Y^h meets
// the target }, by minimizing energy + w * violation^2 with the penalty
// weight w escalated until the residual passes the feasibility tolerance.
// The empty feasible set (e.g. sigma = 0 and a target off psi) surfaces as
// the infinite flag rather than a number.
inline RateValue rate_of_path(const TimeDomain& domain, const DirectionField& field,
                              const CoefficientSet& cs, const Vec& x0, const ReflectedPath& psi,
                              const RateTarget& target, const TimeGrid& grid,
                              const RateOptions& opt = {}) {
    const std::size_t m = cs.noise_dim;
    const std::size_t P = grid.n_steps * m;

    auto unpack = [&](const std::vector<double>& theta) {
        Control h = Control::zero(grid, m);
        for (std::size_t k = 0; k < grid.n_steps; ++k)
            for (std::size_t j = 0; j < m; ++j) h.values[k][j] = theta[k * m + j];
        return h;
    };
    auto violation_of = [&](const Control& h) {
        return target.violation(solve_skeleton(domain, field, cs, x0, psi, h));
    };

    // The zero control may already meet the target (target == psi).
    {
        const Control h0 = Control::zero(grid, m);
        const double v0 = violation_of(h0);
        if (v0 <= opt.feasibility_tol)
            return RateValue{false, 0.0, h0, v0, 0};
    }

    std::vector<double> theta(P, 0.0);
    double best_violation = std::numeric_limits<double>::infinity();
    std::size_t stages_used = 0;

    double w = opt.penalty_init;
    for (std::size_t stage = 0; stage < opt.stages; ++stage, w *= opt.penalty_growth) {
        ++stages_used;
        auto objective = [&](const std::vector<double>& th) {
            const Control h = unpack(th);
            if (h.energy() > opt.energy_ceiling)
                throw Error(ErrorCode::optimization, "control energy exceeded the configured ceiling");
            const double v = violation_of(h);
            return h.energy() + w * v * v;
        };

        double f = objective(theta);
        std::vector<double> grad(P), prev_grad(P), prev_theta(P);
        double step = 0.1;
        bool have_prev = false;

        for (std::size_t iter = 0; iter < opt.max_inner_iters; ++iter) {
            // Forward-difference gradient.
            for (std::size_t i = 0; i < P; ++i) {
                std::vector<double> th = theta;
                th[i] += opt.fd_step;
                grad[i] = (objective(th) - f) / opt.fd_step;
            }
            double gnorm = 0.0;
            for (double g : grad) gnorm += g * g;
            gnorm = std::sqrt(gnorm);
            if (gnorm < 1e-10) break;

            if (have_prev) {
                // Barzilai-Borwein step from the last pair.
                double sy = 0.0, yy = 0.0;
                for (std::size_t i = 0; i < P; ++i) {
                    const double s = theta[i] - prev_theta[i];
                    const double yv = grad[i] - prev_grad[i];
                    sy += s * yv;
                    yy += yv * yv;
                }
                if (yy > 1e-300 && sy > 0.0) step = sy / yy;
            }
            step = std::clamp(step, 1e-8, 10.0);

            prev_theta = theta;
            prev_grad = grad;
            double trial_step = step;
            bool accepted = false;
            for (int bt = 0; bt < 25; ++bt) {
                std::vector<double> th = theta;
                for (std::size_t i = 0; i < P; ++i) th[i] -= trial_step * grad[i];
                const double ft = objective(th);
                if (ft < f - 1e-15) {
                    theta = std::move(th);
                    f = ft;
                    accepted = true;
                    break;
                }
                trial_step *= 0.5;
            }
            have_prev = true;
            if (!accepted) {
                // Coordinate-descent sweep; the dynamics are nonsmooth at the
                // boundary and the gradient model can stall there.
                bool improved = false;
                for (std::size_t i = 0; i < P; ++i) {
                    for (double delta : {step, -step, 0.1 * step, -0.1 * step}) {
                        std::vector<double> th = theta;
                        th[i] += delta;
                        const double ft = objective(th);
                        if (ft < f - 1e-15) {
                            theta = std::move(th);
                            f = ft;
                            improved = true;
                            break;
                        }
                    }
                }
                if (!improved) break;
            }
        }

        best_violation = violation_of(unpack(theta));
        if (best_violation <= 0.1 * opt.feasibility_tol) break;
    }

    const Control h = unpack(theta);
    if (best_violation > opt.feasibility_tol)
        return RateValue{true, std::numeric_limits<double>::infinity(), std::nullopt, best_violation, stages_used};
    return RateValue{false, h.energy(), h, best_violation, stages_used};
}

// ---------------------------------------------------------------------------
// Small-noise and controlled processes
// ---------------------------------------------------------------------------

// Interacting-particle realization of the small-noise dynamics, noise scaled
// by sqrt(epsilon).
inline ParticleEnsemble simulate_small_noise(const TimeDomain& domain, const DirectionField& field,
                                             const CoefficientSet& cs, const Vec& x0, const TimeGrid& grid,
                                             const NoiseDriver& driver, double epsilon,
                                             std::size_t n_copies, std::size_t workers = 0) {
    if (!(epsilon > 0.0) || epsilon > 1.0)
        throw Error(ErrorCode::argument, "epsilon must lie in (0, 1]");
    return simulate_interacting(domain, field, cs, n_copies, fixed_start(x0), grid, driver,
                                std::sqrt(epsilon), workers);
}

// Controlled process: drift picks up sigma * h, the noise keeps the sqrt(eps)
// scale, and the coefficients read the *given* flow - the law of the
// uncontrolled small-noise process - never the controlled ensemble's own law.
// The signature makes that structural point impossible to get wrong.
inline ParticleEnsemble simulate_controlled(const TimeDomain& domain, const DirectionField& field,
                                            const CoefficientSet& cs, const Vec& x0, const TimeGrid& grid,
                                            const NoiseDriver& driver, double epsilon, const Control& h,
                                            const MeasureFlow& mv_flow, std::size_t n_copies,
                                            std::size_t workers = 0) {
    if (epsilon < 0.0 || epsilon > 1.0)
        throw Error(ErrorCode::argument, "epsilon must lie in [0, 1]");
    h.validate();
    if (!(h.grid == grid))
        throw Error(ErrorCode::argument, "control grid does not match the simulation grid");
    if (mv_flow.n_nodes() != grid.n_nodes())
        throw Error(ErrorCode::argument, "measure flow does not match the grid");
    if (distance(domain, 0.0, x0) > domain.boundary_tol())
        throw Error(ErrorCode::argument, "initial state lies outside the closed section at t = 0");

    const double noise_scale = std::sqrt(epsilon);
    ParticleEnsemble ens;
    ens.grid = grid;
    ens.paths.resize(n_copies);
    ens.seeds.resize(n_copies);

    std::vector<std::string> errors(n_copies);
    parallel_for(n_copies, workers, [&](std::size_t c) {
        try {
            ens.seeds[c] = driver.stream_key(c);
            ReflectedPath path;
            path.times = grid.nodes();
            path.states.push_back(x0);
            path.local_time.push_back(0.0);
            path.reflector.push_back(zeros(x0.size()));
            Vec z = x0;
            double local_time = 0.0;
            Vec reflector = zeros(x0.size());
            Vec dw;
            for (std::size_t k = 0; k < grid.n_steps; ++k) {
                const double t = grid.node(k);
                const double dt = grid.node(k + 1) - grid.node(k);
                const EmpiricalMeasure& law = mv_flow.at_node(k);
                Vec drift = eval_drift(cs, t, z, law);
                std::optional<Mat> sigma;
                if (!h.interval_is_zero(k)) {
                    sigma = eval_diffusion(cs, t, z, law);
                    add_mat_vec(drift, 1.0, *sigma, h.values[k]);
                }
                Vec tentative = z;
                axpy(tentative, dt, drift);
                if (noise_scale != 0.0) {
                    if (!sigma) sigma = eval_diffusion(cs, t, z, law);
                    driver.fill_increment(c, k, cs.noise_dim, dt, dw);
                    add_mat_vec(tentative, noise_scale, *sigma, dw);
                }
                const ProjectionResult proj = oblique_project(domain, field, grid.node(k + 1), tentative);
                z = proj.point;
                local_time += proj.xi;
                reflector += proj.displacement;
                path.states.push_back(z);
                path.local_time.push_back(local_time);
                path.reflector.push_back(reflector);
                path.xi_steps.push_back(proj.xi);
            }
            ens.paths[c] = std::move(path);
        } catch (const Error& e) {
            errors[c] = e.what();
        }
    });
    for (std::size_t c = 0; c < n_copies; ++c)
        if (!errors[c].empty())
            throw Error(ErrorCode::projection_failure, errors[c] + " (copy " + std::to_string(c) + ")");
    return ens;
}

// ---------------------------------------------------------------------------
// (LDP1): continuity of the skeleton map along weakly convergent controls
// ---------------------------------------------------------------------------

// Built-in weakly-null perturbations: h_n = h + amplitude * sin(2 pi n t / T)
// on the first noise component, n full oscillations over the horizon.
inline std::vector<Control> make_oscillatory_controls(const Control& h_base, double amplitude,
                                                      const std::vector<std::size_t>& frequencies) {
    std::vector<Control> seq;
    seq.reserve(frequencies.size());
    const TimeGrid& grid = h_base.grid;
    for (std::size_t n : frequencies) {
        Control h = h_base;
        for (std::size_t k = 0; k < grid.n_steps; ++k) {
            const double t = grid.node(k);
            h.values[k][0] += amplitude *
                std::sin(2.0 * std::numbers::pi * static_cast<double>(n) * t / grid.horizon);
        }
        seq.push_back(std::move(h));
    }
    return seq;
}

struct Ldp1Report {
    std::vector<double> distances;   // sup-norm ||Y^{h_n} - Y^{h}|| per sequence member
    bool nonincreasing = false;
    bool converged = false;          // final distance below the tolerance
    double tolerance = 0.0;
};

inline Ldp1Report check_ldp1(const TimeDomain& domain, const DirectionField& field,
                             const CoefficientSet& cs, const Vec& x0, const ReflectedPath& psi,
                             const std::vector<Control>& h_sequence, const Control& h_limit,
                             double tolerance = 1e-2) {
    const ReflectedPath y_limit = solve_skeleton(domain, field, cs, x0, psi, h_limit);
    Ldp1Report report;
    report.tolerance = tolerance;
    for (const Control& hn : h_sequence) {
        const ReflectedPath yn = solve_skeleton(domain, field, cs, x0, psi, hn);
        report.distances.push_back(yn.sup_distance(y_limit, yn.n_nodes() - 1));
    }
    report.nonincreasing = true;
    for (std::size_t i = 1; i < report.distances.size(); ++i)
        if (report.distances[i] > report.distances[i - 1] + 1e-12) report.nonincreasing = false;
    report.converged = !report.distances.empty() && report.distances.back() < tolerance;
    return report;
}

// ---------------------------------------------------------------------------
// (LDP2): controlled process concentrates on the skeleton as eps -> 0
// ---------------------------------------------------------------------------

struct Ldp2Row {
    double epsilon;
    double prob;      // empirical P(sup_t ||Z_eps - Y_h|| > theta)
    double std_err;
};

struct Ldp2Report {
    std::vector<Ldp2Row> rows;
    bool nonincreasing_within_2se = false;
    double theta = 0.0;
};

inline Ldp2Report check_ldp2(const TimeDomain& domain, const DirectionField& field,
                             const CoefficientSet& cs, const Vec& x0, const TimeGrid& grid,
                             const NoiseDriver& driver, const std::vector<double>& epsilon_list,
                             const Control& h, double theta, std::size_t n_copies,
                             std::size_t workers = 0) {
    for (std::size_t i = 1; i < epsilon_list.size(); ++i)
        if (epsilon_list[i] >= epsilon_list[i - 1])
            throw Error(ErrorCode::argument, "epsilon_list must be strictly descending");

    const ReflectedPath psi = solve_limit_ode(domain, field, cs, x0, grid);
    const ReflectedPath y_h = solve_skeleton(domain, field, cs, x0, psi, h);

    Ldp2Report report;
    report.theta = theta;
    for (std::size_t e = 0; e < epsilon_list.size(); ++e) {
        const double eps = epsilon_list[e];
        const NoiseDriver noise_driver(derive_seed(driver.master_seed(), "ldp2.small_noise", e));
        const NoiseDriver ctrl_driver(derive_seed(driver.master_seed(), "ldp2.controlled", e));
        const ParticleEnsemble xe =
            simulate_small_noise(domain, field, cs, x0, grid, noise_driver, eps, n_copies, workers);
        const MeasureFlow flow = xe.empirical_flow();
        const ParticleEnsemble ze =
            simulate_controlled(domain, field, cs, x0, grid, ctrl_driver, eps, h, flow, n_copies, workers);

        std::size_t hits = 0;
        for (const ReflectedPath& z : ze.paths)
            if (z.sup_distance(y_h, z.n_nodes() - 1) > theta) ++hits;
        const double p = static_cast<double>(hits) / static_cast<double>(n_copies);
        report.rows.push_back({eps, p, std::sqrt(p * (1.0 - p) / static_cast<double>(n_copies))});
    }

    report.nonincreasing_within_2se = true;
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
        const auto& a = report.rows[i - 1];
        const auto& b = report.rows[i];
        const double slack = 2.0 * std::sqrt(a.std_err * a.std_err + b.std_err * b.std_err);
        if (b.prob > a.prob + slack) report.nonincreasing_within_2se = false;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Limit law: sup_t W2(mu^eps_t, delta_psi_t) -> 0
// ---------------------------------------------------------------------------

struct LimitLawRow {
    double epsilon;
    double sup_w2;
    double std_err;  // from batch means
};

struct LimitLawReport {
    std::vector<LimitLawRow> rows;
    bool nonincreasing_within_2se = false;
};

inline LimitLawReport check_limit_law(const TimeDomain& domain, const DirectionField& field,
                                      const CoefficientSet& cs, const Vec& x0, const TimeGrid& grid,
                                      const NoiseDriver& driver, const std::vector<double>& epsilon_list,
                                      std::size_t n_copies, std::size_t workers = 0) {
    for (std::size_t i = 1; i < epsilon_list.size(); ++i)
        if (epsilon_list[i] >= epsilon_list[i - 1])
            throw Error(ErrorCode::argument, "epsilon_list must be strictly descending");

    const ReflectedPath psi = solve_limit_ode(domain, field, cs, x0, grid);
    LimitLawReport report;
    const std::size_t n_batches = 8;

    for (std::size_t e = 0; e < epsilon_list.size(); ++e) {
        const double eps = epsilon_list[e];
        const NoiseDriver noise_driver(derive_seed(driver.master_seed(), "limit_law", e));
        const ParticleEnsemble xe =
            simulate_small_noise(domain, field, cs, x0, grid, noise_driver, eps, n_copies, workers);

        auto sup_w2_of = [&](const std::vector<std::size_t>& subset) {
            double sup = 0.0;
            for (std::size_t k = 0; k < grid.n_nodes(); ++k) {
                std::vector<Vec> pts;
                pts.reserve(subset.size());
                for (std::size_t i : subset) pts.push_back(xe.paths[i].states[k]);
                const EmpiricalMeasure mu = EmpiricalMeasure::uniform(std::move(pts));
                sup = std::max(sup, wasserstein2(mu, EmpiricalMeasure::dirac(psi.states[k])).distance);
            }
            return sup;
        };

        std::vector<std::size_t> all(n_copies);
        std::iota(all.begin(), all.end(), std::size_t{0});
        const double stat = sup_w2_of(all);

        double bsum = 0.0, bsum_sq = 0.0;
        const std::size_t batch_size = n_copies / n_batches;
        for (std::size_t b = 0; b < n_batches; ++b) {
            std::vector<std::size_t> subset(all.begin() + b * batch_size,
                                            all.begin() + (b + 1) * batch_size);
            const double s = sup_w2_of(subset);
            bsum += s;
            bsum_sq += s * s;
        }
        const double bmean = bsum / n_batches;
        const double bvar = std::max(0.0, bsum_sq / n_batches - bmean * bmean);
        report.rows.push_back({eps, stat, std::sqrt(bvar / (n_batches - 1))});
    }

    report.nonincreasing_within_2se = true;
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
        const auto& a = report.rows[i - 1];
        const auto& b = report.rows[i];
        const double slack = 2.0 * std::sqrt(a.std_err * a.std_err + b.std_err * b.std_err);
        if (b.sup_w2 > a.sup_w2 + slack) report.nonincreasing_within_2se = false;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Rare-event estimation
// ---------------------------------------------------------------------------

struct PathEvent {
    std::function<bool(const std::vector<double>& times, const std::vector<Vec>& states)> hit;
    std::string label;
};

// Event {|X_T - origin| > a}.
inline PathEvent terminal_escape_event(Vec origin, double a) {
    PathEvent e;
    e.label = "terminal_escape";
    e.hit = [origin = std::move(origin), a](const std::vector<double>&, const std::vector<Vec>& states) {
        return dist(states.back(), origin) > a;
    };
    return e;
}

// Event {sup_t |X_t - psi_t| > delta}.
inline PathEvent sup_deviation_event(ReflectedPath psi, double delta) {
    PathEvent e;
    e.label = "sup_deviation";
    e.hit = [psi = std::move(psi), delta](const std::vector<double>&, const std::vector<Vec>& states) {
        for (std::size_t k = 0; k < states.size(); ++k)
            if (dist(states[k], psi.states[k]) > delta) return true;
        return false;
    };
    return e;
}

namespace detail {

inline double log_beta(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Regularized incomplete beta by Lentz's continued fraction.
inline double beta_cf(double a, double b, double x) {
    const double tiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 400; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-14) break;
    }
    return h;
}

inline double inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
    return 1.0 - std::exp(b * std::log1p(-x) + a * std::log(x) - log_beta(b, a)) * beta_cf(b, a, 1.0 - x) / b;
}

inline double inc_beta_inv(double a, double b, double p) {
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (inc_beta(a, b, mid) < p) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

// Clopper-Pearson interval at confidence 1 - alpha.
inline std::pair<double, double> binomial_ci(std::size_t hits, std::size_t n, double alpha = 0.05) {
    const double k = static_cast<double>(hits);
    const double nn = static_cast<double>(n);
    const double lo = hits == 0 ? 0.0 : inc_beta_inv(k, nn - k + 1.0, alpha / 2.0);
    const double hi = hits == n ? 1.0 : inc_beta_inv(k + 1.0, nn - k, 1.0 - alpha / 2.0);
    return {lo, hi};
}

} // namespace detail

struct RareEventRow {
    double epsilon;
    std::size_t n_copies;
    std::size_t hits;
    double p_hat;
    double ci_low;
    double ci_high;
    double neg_eps_log_p;   // NaN when hits == 0
    bool one_sided;         // zero hits: only the upper CI bound is informative
};

struct RareEventTable {
    std::vector<RareEventRow> rows;
};

// Crude Monte Carlo over independent copies. Interaction is handled in the
// McKean-Vlasov way: the mean-field flow at each epsilon is simulated once
// with n_flow_copies interacting particles, then independent copies stream
// against that frozen flow - that independence is what makes the binomial
// confidence intervals honest. Copies are processed in batches so memory
// stays flat at any n_copies.
inline RareEventTable estimate_rare_event(const TimeDomain& domain, const DirectionField& field,
                                          const CoefficientSet& cs, const Vec& x0, const TimeGrid& grid,
                                          const NoiseDriver& driver, const std::vector<double>& epsilon_list,
                                          const PathEvent& event, const std::vector<std::size_t>& n_copies_list,
                                          std::size_t n_flow_copies = 256, std::size_t workers = 0) {
    if (epsilon_list.empty()) throw Error(ErrorCode::argument, "epsilon_list must not be empty");
    if (n_copies_list.size() != 1 && n_copies_list.size() != epsilon_list.size())
        throw Error(ErrorCode::argument, "n_copies_list must have one entry or one per epsilon");
    if (distance(domain, 0.0, x0) > domain.boundary_tol())
        throw Error(ErrorCode::argument, "initial state lies outside the closed section at t = 0");

    RareEventTable table;
    const std::vector<double> times = grid.nodes();

    for (std::size_t e = 0; e < epsilon_list.size(); ++e) {
        const double eps = epsilon_list[e];
        const double noise_scale = std::sqrt(eps);
        const std::size_t n = n_copies_list.size() == 1 ? n_copies_list[0] : n_copies_list[e];

        MeasureFlow flow;
        if (cs.interaction_free) {
            const ReflectedPath psi = solve_limit_ode(domain, field, cs, x0, grid);
            flow = MeasureFlow::dirac_flow(psi.times, psi.states);
        } else {
            const NoiseDriver flow_driver(derive_seed(driver.master_seed(), "rare_event.flow", e));
            flow = simulate_small_noise(domain, field, cs, x0, grid, flow_driver, eps,
                                        n_flow_copies, workers)
                       .empirical_flow();
        }

        const std::uint64_t stream_root = derive_seed(driver.master_seed(), "rare_event.copies", e);
        const std::size_t n_chunks = std::min<std::size_t>(std::max<std::size_t>(resolve_workers(workers) * 8, 1), n);
        std::vector<std::size_t> chunk_hits(n_chunks, 0);

        parallel_for(n_chunks, workers, [&](std::size_t chunk) {
            const std::size_t lo = chunk * n / n_chunks;
            const std::size_t hi = (chunk + 1) * n / n_chunks;
            std::vector<Vec> states(grid.n_nodes());
            Vec dw(cs.noise_dim), tentative;
            std::size_t hits = 0;
            for (std::size_t c = lo; c < hi; ++c) {
                const std::uint64_t stream = mix_keys(stream_root, c);
                Vec x = x0;
                states[0] = x;
                for (std::size_t k = 0; k < grid.n_steps; ++k) {
                    const double t = grid.node(k);
                    const double dt = grid.node(k + 1) - grid.node(k);
                    const double root_dt = std::sqrt(dt);
                    for (std::size_t j = 0; j < cs.noise_dim; ++j)
                        dw[j] = root_dt * counter_gaussian(stream, k * cs.noise_dim + j);
                    const EmpiricalMeasure& law = flow.at_node(k);
                    tentative = x;
                    axpy(tentative, dt, eval_drift(cs, t, x, law));
                    add_mat_vec(tentative, noise_scale, eval_diffusion(cs, t, x, law), dw);
                    const ProjectionResult proj =
                        oblique_project(domain, field, grid.node(k + 1), tentative);
                    x = proj.point;
                    states[k + 1] = x;
                }
                if (event.hit(times, states)) ++hits;
            }
            chunk_hits[chunk] = hits;
        });

        std::size_t hits = 0;
        for (std::size_t h : chunk_hits) hits += h;
        const double p_hat = static_cast<double>(hits) / static_cast<double>(n);
        const auto [lo, hi] = detail::binomial_ci(hits, n);
        RareEventRow row;
        row.epsilon = eps;
        row.n_copies = n;
        row.hits = hits;
        row.p_hat = p_hat;
        row.ci_low = lo;
        row.ci_high = hi;
        row.one_sided = hits == 0;
        row.neg_eps_log_p = hits == 0 ? std::numeric_limits<double>::quiet_NaN() : -eps * std::log(p_hat);
        table.rows.push_back(row);
    }
    return table;
}

} // namespace mvreflect
