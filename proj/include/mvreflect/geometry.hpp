#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "mvreflect/errors.hpp"
#include "mvreflect/linalg.hpp"
#include "mvreflect/rng.hpp"

namespace mvreflect {

// Time-dependent domain described by its distance function d(t, x): zero
// exactly on the closed section, positive outside. Sections stay inside the
// ball of bounding_radius around the origin.
struct TimeDomain {
    double horizon = 1.0;
    std::size_t dim = 1;
    double bounding_radius = 1.0;
    // Declared bound on |d(t+h,x) - d(t,x)| / h; probed by validate_time_regularity.
    double time_lipschitz_bound = 0.0;
    std::function<double(double, const Vec&)> dist;
    // Analytic inward normal when the geometry has one in closed form;
    // make_normal_field falls back to finite differences otherwise.
    std::function<Vec(double, const Vec&)> inward_normal;
    std::string name = "custom";

    double boundary_tol() const { return 1e-9 * bounding_radius; }
};

inline constexpr double nearest_boundary_rel_tol = 1e-6;

inline double distance(const TimeDomain& domain, double t, const Vec& x) {
    if (t < -1e-12 * domain.horizon || t > domain.horizon * (1.0 + 1e-12))
        throw Error(ErrorCode::domain_range, "time " + std::to_string(t) + " outside [0, T]");
    if (x.size() != domain.dim) throw Error(ErrorCode::shape, "point dimension mismatch");
    return domain.dist(t, x);
}

// Oblique direction of reflection. Unit norm is required at and outside the
// boundary; rho is the aperture of the exterior cone the field must satisfy.
struct DirectionField {
    std::function<Vec(double, const Vec&)> gamma;
    double rho = 0.5;
    std::string name = "custom";
};

struct BoundaryAnchor {
    Vec point;
    double time = 0.0;
    Vec inward_hint;
};

namespace detail {

inline Vec fd_gradient(const TimeDomain& domain, double t, const Vec& x, double h) {
    Vec g(x.size(), 0.0);
    Vec p = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        p[i] = x[i] + h;
        const double up = domain.dist(t, p);
        p[i] = x[i] - h;
        const double dn = domain.dist(t, p);
        p[i] = x[i];
        g[i] = (up - dn) / (2.0 * h);
    }
    return g;
}

// First point along x + s*u where the distance function crosses the given
// level, bracketed by [s_out, s_in]; shrinks the bracket to width <= tol.
inline double bisect_crossing(const TimeDomain& domain, double t, const Vec& x, const Vec& u,
                              double s_lo, double s_hi, bool lo_outside, double tol) {
    Vec p(x.size());
    auto outside = [&](double s) {
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = x[i] + s * u[i];
        return domain.dist(t, p) > 0.0;
    };
    while (s_hi - s_lo > tol) {
        const double mid = 0.5 * (s_lo + s_hi);
        if (outside(mid) == lo_outside) s_lo = mid; else s_hi = mid;
    }
    return s_hi;
}

inline std::vector<Vec> probe_directions(std::size_t d, std::size_t extra) {
    std::vector<Vec> dirs;
    dirs.reserve(2 * d + extra);
    for (std::size_t i = 0; i < d; ++i) {
        Vec e = zeros(d);
        e[i] = 1.0;
        dirs.push_back(e);
        e[i] = -1.0;
        dirs.push_back(e);
    }
    CounterRng rng(fnv1a64("geometry.probe_directions"));
    for (std::size_t k = 0; k < extra && d > 1; ++k) dirs.push_back(rng.unit_vec(d));
    return dirs;
}

} // namespace detail

// Closest boundary point found by gradient walk (exterior start) or
// directional search (interior start). The inward_hint points into the
// domain at the returned point.
inline BoundaryAnchor nearest_boundary(const TimeDomain& domain, double t, const Vec& x) {
    const double tol = domain.boundary_tol();
    const double d0 = distance(domain, t, x);

    if (d0 > tol) {
        // Exterior: follow -grad d, which points along the segment to the
        // nearest point of the section; then sharpen on the chord from x.
        Vec p = x;
        double dp = d0;
        std::optional<Vec> inside_point;
        for (int iter = 0; iter < 64; ++iter) {
            const double h = std::max(1e-7 * domain.bounding_radius, 1e-3 * dp);
            const Vec g = normalized(detail::fd_gradient(domain, t, p, h), 1e-12);
            if (norm(g) == 0.0) break;
            Vec cand = p;
            axpy(cand, -dp, g);
            const double dc = domain.dist(t, cand);
            if (dc <= tol) {
                inside_point = cand;
                break;
            }
            if (dc >= dp) break;  // no progress; fall back below
            p = cand;
            dp = dc;
        }
        if (!inside_point) {
            // Fallback: scan directions for any chord into the section.
            double best_s = 0.0;
            Vec best_u;
            const double s_max = norm(x) + domain.bounding_radius * 1.001;
            for (const Vec& u : detail::probe_directions(domain.dim, 24)) {
                double s = std::max(d0, 1e-6 * domain.bounding_radius);
                Vec q(x.size());
                while (s <= s_max) {
                    for (std::size_t i = 0; i < q.size(); ++i) q[i] = x[i] + s * u[i];
                    if (domain.dist(t, q) <= 0.0) break;
                    s *= 2.0;
                }
                if (s <= s_max && (best_u.empty() || s < best_s)) {
                    best_s = s;
                    best_u = u;
                }
            }
            if (best_u.empty())
                throw Error(ErrorCode::geometry_search,
                            "no bracket into the domain section within the bounding radius");
            Vec q = x;
            axpy(q, best_s, best_u);
            inside_point = q;
        }
        // Crossing on the chord [x, inside_point].
        Vec u = *inside_point - x;
        const double len = norm(u);
        if (len <= tol) return BoundaryAnchor{*inside_point, t, normalized(u, 0.0)};
        for (double& v : u) v /= len;
        const double s = detail::bisect_crossing(domain, t, x, u, 0.0, len, true, tol);
        Vec anchor = x;
        axpy(anchor, s, u);
        return BoundaryAnchor{anchor, t, u};
    }

    // Interior or on the boundary: shortest exit over probe directions,
    // with a pattern-search refinement around the best one.
    const auto base = detail::probe_directions(domain.dim, domain.dim <= 3 ? 24 : 8 * domain.dim);
    const double s_max = norm(x) + domain.bounding_radius * 1.001;
    auto exit_distance = [&](const Vec& u) -> std::optional<double> {
        double s = std::max(tol, 1e-5 * domain.bounding_radius);
        Vec q(x.size());
        while (s <= s_max) {
            for (std::size_t i = 0; i < q.size(); ++i) q[i] = x[i] + s * u[i];
            if (domain.dist(t, q) > 0.0) return s;
            s *= 2.0;
        }
        return std::nullopt;
    };

    Vec best_u;
    double best_s = 0.0;
    for (const Vec& u : base) {
        if (auto s = exit_distance(u)) {
            if (best_u.empty() || *s < best_s) {
                best_s = *s;
                best_u = u;
            }
        }
    }
    if (best_u.empty())
        throw Error(ErrorCode::geometry_search, "interior search found no exit within the bounding radius");

    for (int round = 0; round < 8; ++round) {
        bool improved = false;
        for (std::size_t i = 0; i < domain.dim; ++i) {
            for (double step : {0.5, -0.5, 0.25, -0.25}) {
                Vec u = best_u;
                u[i] += step;
                u = normalized(u, 1e-12);
                if (norm(u) == 0.0) continue;
                if (auto s = exit_distance(u)) {
                    if (*s < best_s) {
                        best_s = *s;
                        best_u = u;
                        improved = true;
                    }
                }
            }
        }
        if (!improved) break;
    }

    if (best_s <= tol) {
        // x itself sits on the boundary within tolerance.
        Vec hint = best_u;
        for (double& v : hint) v = -v;
        return BoundaryAnchor{x, t, hint};
    }
    const double s = detail::bisect_crossing(domain, t, x, best_u, 0.0, 2.0 * best_s, false, tol);
    Vec anchor = x;
    axpy(anchor, s, best_u);
    Vec hint = best_u;
    for (double& v : hint) v = -v;
    return BoundaryAnchor{anchor, t, hint};
}

// ---------------------------------------------------------------------------
// Validators
// ---------------------------------------------------------------------------

struct ConeViolation {
    double t;
    Vec anchor;
    double xi;
    Vec point;
    double dist_value;
};

struct ConeReport {
    std::size_t n_anchors = 0;
    std::size_t n_points = 0;
    std::vector<ConeViolation> violations;
    std::size_t unit_norm_failures = 0;
    bool ok() const { return violations.empty() && unit_norm_failures == 0; }
};

// Samples boundary anchors and checks the exterior cone inclusion: every
// point of B(x - xi*gamma, xi*rho) for xi in (0, rho] must have positive
// distance. Violations are recorded, not thrown.
inline ConeReport validate_cone_condition(const TimeDomain& domain, const DirectionField& field,
                                          std::size_t n_samples, std::uint64_t seed = 0) {
    if (n_samples < 1) throw Error(ErrorCode::argument, "n_samples must be >= 1");
    ConeReport report;
    CounterRng rng(derive_seed(seed, "geometry.cone_validation"));
    const auto ball_dirs = detail::probe_directions(domain.dim, domain.dim <= 3 ? 10 : 2 * domain.dim);
    const int n_xi = 8;

    for (std::size_t s = 0; s < n_samples; ++s) {
        const double t = rng.uniform(0.0, domain.horizon);
        Vec x0(domain.dim);
        for (double& v : x0) v = rng.uniform(-1.2 * domain.bounding_radius, 1.2 * domain.bounding_radius);
        BoundaryAnchor anchor;
        try {
            anchor = nearest_boundary(domain, t, x0);
        } catch (const Error&) {
            continue;  // unlucky sample; the anchor count tells how many were checked
        }
        ++report.n_anchors;

        const Vec g = field.gamma(t, anchor.point);
        if (std::abs(norm(g) - 1.0) > 1e-6) {
            ++report.unit_norm_failures;
            continue;
        }
        for (int j = 1; j <= n_xi; ++j) {
            const double xi = field.rho * static_cast<double>(j) / static_cast<double>(n_xi);
            Vec center = anchor.point;
            axpy(center, -xi, g);
            for (double radial : {0.0, 0.5, 1.0}) {
                for (const Vec& v : ball_dirs) {
                    Vec y = center;
                    axpy(y, radial * xi * field.rho, v);
                    ++report.n_points;
                    const double dv = domain.dist(t, y);
                    if (!(dv > 0.0)) {
                        report.violations.push_back({t, anchor.point, xi, y, dv});
                    }
                    if (radial == 0.0) break;  // center once per xi
                }
            }
        }
    }
    return report;
}

struct TimeRegularityReport {
    double max_quotient = 0.0;
    double declared_bound = 0.0;
    bool ok = true;
};

// Discrete time-difference quotients of d(., x) against the declared bound.
inline TimeRegularityReport validate_time_regularity(const TimeDomain& domain, std::size_t x_samples,
                                                     double dt_probe, std::uint64_t seed = 0) {
    if (!(dt_probe > 0.0)) throw Error(ErrorCode::argument, "dt_probe must be positive");
    TimeRegularityReport report;
    report.declared_bound = domain.time_lipschitz_bound;
    CounterRng rng(derive_seed(seed, "geometry.time_regularity"));
    for (std::size_t s = 0; s < x_samples; ++s) {
        Vec x(domain.dim);
        for (double& v : x) v = rng.uniform(-2.0 * domain.bounding_radius, 2.0 * domain.bounding_radius);
        for (double t = 0.0; t + dt_probe <= domain.horizon; t += dt_probe) {
            const double q = std::abs(domain.dist(t + dt_probe, x) - domain.dist(t, x)) / dt_probe;
            report.max_quotient = std::max(report.max_quotient, q);
        }
    }
    report.ok = report.max_quotient <= report.declared_bound * (1.0 + 1e-9) + 1e-12;
    return report;
}

// ---------------------------------------------------------------------------
// Built-in domains. All are exactly computable, which makes them usable as
// oracles for the projection scheme.
// ---------------------------------------------------------------------------

// D_t = (-r(t), r(t)) with r(t) = r0 + amplitude*sin(2*pi*t/T).
inline TimeDomain make_moving_interval(double r0, double amplitude, double horizon) {
    if (!(r0 > std::abs(amplitude)))
        throw Error(ErrorCode::argument, "interval radius must dominate the amplitude");
    TimeDomain d;
    d.horizon = horizon;
    d.dim = 1;
    d.bounding_radius = r0 + std::abs(amplitude);
    d.time_lipschitz_bound = 2.0 * std::numbers::pi * std::abs(amplitude) / horizon;
    d.name = "interval";
    d.dist = [r0, amplitude, horizon](double t, const Vec& x) {
        const double r = r0 + amplitude * std::sin(2.0 * std::numbers::pi * t / horizon);
        return std::max(0.0, std::abs(x[0]) - r);
    };
    d.inward_normal = [](double, const Vec& x) -> Vec {
        if (x[0] > 0.0) return {-1.0};
        if (x[0] < 0.0) return {1.0};
        return {0.0};
    };
    return d;
}

// Disk of radius r(t) = r0 + amplitude*sin(2*pi*t/T) around a drifting center.
inline TimeDomain make_moving_disk(double r0, double amplitude, double horizon,
                                   Vec center = {0.0, 0.0}, Vec velocity = {0.0, 0.0}) {
    if (!(r0 > std::abs(amplitude)))
        throw Error(ErrorCode::argument, "disk radius must dominate the amplitude");
    TimeDomain d;
    d.horizon = horizon;
    d.dim = 2;
    d.bounding_radius = norm(center) + norm(velocity) * horizon + r0 + std::abs(amplitude);
    d.time_lipschitz_bound = norm(velocity) + 2.0 * std::numbers::pi * std::abs(amplitude) / horizon;
    d.name = "disk";
    d.dist = [r0, amplitude, horizon, center, velocity](double t, const Vec& x) {
        const double r = r0 + amplitude * std::sin(2.0 * std::numbers::pi * t / horizon);
        double s = 0.0;
        for (std::size_t i = 0; i < 2; ++i) {
            const double c = center[i] + velocity[i] * t;
            s += (x[i] - c) * (x[i] - c);
        }
        return std::max(0.0, std::sqrt(s) - r);
    };
    d.inward_normal = [center, velocity](double t, const Vec& x) -> Vec {
        Vec u{center[0] + velocity[0] * t - x[0], center[1] + velocity[1] * t - x[1]};
        return normalized(u, 1e-12);
    };
    return d;
}

// Axis-aligned box with rounded corners; the half-widths breathe by the
// factor 1 + amplitude*sin(2*pi*t/T). Exact Euclidean distance: the rounded
// box is the Minkowski sum of the shrunk core box and a corner_radius ball.
inline TimeDomain make_moving_box(Vec half_widths, double corner_radius, double amplitude, double horizon) {
    const std::size_t dim = half_widths.size();
    if (dim == 0) throw Error(ErrorCode::argument, "box needs at least one half-width");
    double w_min = half_widths[0];
    for (double w : half_widths) w_min = std::min(w_min, w);
    if (!(corner_radius > 0.0) || !(corner_radius < w_min * (1.0 - std::abs(amplitude))))
        throw Error(ErrorCode::argument, "corner radius must fit inside the shrunken box");
    TimeDomain d;
    d.horizon = horizon;
    d.dim = dim;
    d.bounding_radius = norm(half_widths) * (1.0 + std::abs(amplitude));
    d.time_lipschitz_bound = 2.0 * std::numbers::pi * std::abs(amplitude) * norm(half_widths) / horizon;
    d.name = "box";
    d.dist = [half_widths, corner_radius, amplitude, horizon](double t, const Vec& x) {
        const double scale = 1.0 + amplitude * std::sin(2.0 * std::numbers::pi * t / horizon);
        double s = 0.0;
        for (std::size_t i = 0; i < half_widths.size(); ++i) {
            const double q = std::abs(x[i]) - (half_widths[i] * scale - corner_radius);
            if (q > 0.0) s += q * q;
        }
        return std::max(0.0, std::sqrt(s) - corner_radius);
    };
    d.inward_normal = [half_widths, corner_radius, amplitude, horizon](double t, const Vec& x) -> Vec {
        const double scale = 1.0 + amplitude * std::sin(2.0 * std::numbers::pi * t / horizon);
        const std::size_t n = half_widths.size();
        Vec q(n);
        bool outside_core = false;
        for (std::size_t i = 0; i < n; ++i) {
            q[i] = std::abs(x[i]) - (half_widths[i] * scale - corner_radius);
            if (q[i] > 0.0) outside_core = true;
        }
        Vec outward(n, 0.0);
        if (outside_core) {
            for (std::size_t i = 0; i < n; ++i)
                if (q[i] > 0.0) outward[i] = (x[i] >= 0.0 ? q[i] : -q[i]);
            outward = normalized(outward, 1e-12);
        } else {
            std::size_t j = 0;
            for (std::size_t i = 1; i < n; ++i)
                if (q[i] > q[j]) j = i;
            outward[j] = (x[j] >= 0.0 ? 1.0 : -1.0);
        }
        for (double& v : outward) v = -v;
        return outward;
    };
    return d;
}

// ---------------------------------------------------------------------------
// Built-in direction fields
// ---------------------------------------------------------------------------

// Inward normal field: the analytic one when the domain provides it, a
// normalized finite-difference gradient of d otherwise.
inline DirectionField make_normal_field(const TimeDomain& domain, double rho = 0.5) {
    DirectionField f;
    f.rho = rho;
    f.name = "normal";
    if (domain.inward_normal) {
        f.gamma = domain.inward_normal;
        return f;
    }
    const auto dist_fn = domain.dist;
    const double radius = domain.bounding_radius;
    f.gamma = [dist_fn, radius](double t, const Vec& x) -> Vec {
        const double d0 = dist_fn(t, x);
        const double h = std::max(1e-6 * radius, 1e-3 * d0);
        Vec g(x.size(), 0.0);
        Vec p = x;
        for (std::size_t i = 0; i < x.size(); ++i) {
            p[i] = x[i] + h;
            const double up = dist_fn(t, p);
            p[i] = x[i] - h;
            const double dn = dist_fn(t, p);
            p[i] = x[i];
            g[i] = (up - dn) / (2.0 * h);
        }
        Vec u = normalized(g, 1e-9);
        for (double& v : u) v = -v;
        return u;
    };
    return f;
}

// Inward normal rotated clockwise by angle_rad in the plane (d = 2 only).
inline DirectionField make_rotated_field(const TimeDomain& domain, double angle_rad, double rho = 0.4) {
    if (domain.dim != 2)
        throw Error(ErrorCode::argument, "rotated oblique field is a planar construction (d = 2)");
    DirectionField base = make_normal_field(domain);
    DirectionField f;
    f.rho = rho;
    f.name = "rotated";
    const double c = std::cos(angle_rad);
    const double s = std::sin(angle_rad);
    f.gamma = [base, c, s](double t, const Vec& x) -> Vec {
        const Vec g = base.gamma(t, x);
        return {c * g[0] + s * g[1], -s * g[0] + c * g[1]};
    };
    return f;
}

// Deliberately broken field: the outward normal. The cone then points into
// the domain and the validator must flag it.
inline DirectionField make_outward_field(const TimeDomain& domain, double rho = 0.4) {
    DirectionField base = make_normal_field(domain);
    DirectionField f;
    f.rho = rho;
    f.name = "outward";
    f.gamma = [base](double t, const Vec& x) -> Vec {
        Vec g = base.gamma(t, x);
        for (double& v : g) v = -v;
        return g;
    };
    return f;
}

} // namespace mvreflect
