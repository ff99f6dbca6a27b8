#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mvreflect/geometry.hpp"
#include "mvreflect/measures.hpp"
#include "mvreflect/rng.hpp"
#include "mvreflect/transport.hpp"

namespace mvreflect {

// Measure dependence in interaction-kernel form:
//   value(t, x, mu) = self_term(t, x) + sum_i w_i * pair_term(t, x, y_i).
// The weighted sum runs in the measure's canonical atom order.
struct VectorKernel {
    std::function<Vec(double, const Vec&)> self_term;             // nullable -> zero
    std::function<Vec(double, const Vec&, const Vec&)> pair_term; // nullable -> zero

    Vec eval(double t, const Vec& x, const EmpiricalMeasure& mu, std::size_t out_dim) const {
        Vec acc = self_term ? self_term(t, x) : zeros(out_dim);
        if (acc.size() != out_dim) throw Error(ErrorCode::shape, "kernel self term has wrong dimension");
        if (pair_term) {
            for (std::size_t i : mu.canonical_order()) {
                const Vec term = pair_term(t, x, mu.point(i));
                if (term.size() != out_dim) throw Error(ErrorCode::shape, "kernel pair term has wrong dimension");
                axpy(acc, mu.weight(i), term);
            }
        }
        return acc;
    }
};

struct MatrixKernel {
    std::function<Mat(double, const Vec&)> self_term;
    std::function<Mat(double, const Vec&, const Vec&)> pair_term;

    Mat eval(double t, const Vec& x, const EmpiricalMeasure& mu, std::size_t rows, std::size_t cols) const {
        Mat acc = self_term ? self_term(t, x) : Mat(rows, cols);
        if (acc.rows != rows || acc.cols != cols)
            throw Error(ErrorCode::shape, "kernel self term has wrong shape");
        if (pair_term) {
            for (std::size_t i : mu.canonical_order()) {
                const Mat term = pair_term(t, x, mu.point(i));
                if (term.rows != rows || term.cols != cols)
                    throw Error(ErrorCode::shape, "kernel pair term has wrong shape");
                for (std::size_t k = 0; k < acc.a.size(); ++k) acc.a[k] += mu.weight(i) * term.a[k];
            }
        }
        return acc;
    }
};

// Drift b(t,x,mu) in R^d and diffusion sigma(t,x,mu) in R^{d x m}, together
// with the declared Lipschitz envelope L(t) and growth constant C for the
// bound ||b|| + ||sigma|| <= C (1 + L(t)) on the domain sections.
struct CoefficientSet {
    std::size_t dim = 1;
    std::size_t noise_dim = 1;
    std::function<Vec(double, const Vec&, const EmpiricalMeasure&)> drift;
    std::function<Mat(double, const Vec&, const EmpiricalMeasure&)> diffusion;
    std::function<double(double)> lipschitz_envelope;
    double growth_constant = 1.0;
    // true when the drift pair term vanishes (no interaction); lets callers
    // skip the measure bookkeeping where it provably cannot matter
    bool interaction_free = false;
    std::string name = "custom";
};

inline Vec eval_drift(const CoefficientSet& cs, double t, const Vec& x, const EmpiricalMeasure& mu) {
    if (x.size() != cs.dim) throw Error(ErrorCode::shape, "drift input dimension mismatch");
    Vec b = cs.drift(t, x, mu);
    if (b.size() != cs.dim) throw Error(ErrorCode::shape, "drift output dimension mismatch");
    return b;
}

inline Mat eval_diffusion(const CoefficientSet& cs, double t, const Vec& x, const EmpiricalMeasure& mu) {
    if (x.size() != cs.dim) throw Error(ErrorCode::shape, "diffusion input dimension mismatch");
    Mat s = cs.diffusion(t, x, mu);
    if (s.rows != cs.dim || s.cols != cs.noise_dim)
        throw Error(ErrorCode::shape, "diffusion output shape mismatch");
    return s;
}

inline CoefficientSet make_kernel_coefficients(std::size_t dim, std::size_t noise_dim,
                                               VectorKernel drift_kernel, MatrixKernel diffusion_kernel,
                                               std::function<double(double)> envelope, double growth_constant,
                                               std::string name = "kernel") {
    CoefficientSet cs;
    cs.dim = dim;
    cs.noise_dim = noise_dim;
    cs.interaction_free = !drift_kernel.pair_term && !diffusion_kernel.pair_term;
    cs.drift = [drift_kernel, dim](double t, const Vec& x, const EmpiricalMeasure& mu) {
        return drift_kernel.eval(t, x, mu, dim);
    };
    cs.diffusion = [diffusion_kernel, dim, noise_dim](double t, const Vec& x, const EmpiricalMeasure& mu) {
        return diffusion_kernel.eval(t, x, mu, dim, noise_dim);
    };
    cs.lipschitz_envelope = std::move(envelope);
    cs.growth_constant = growth_constant;
    cs.name = std::move(name);
    return cs;
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

// zero:           b = 0, sigma = 0                      (frozen dynamics)
// mean_reversion: b = mean(mu) - x, sigma = 0.4 I       (interacting, noisy)
// std_vol:        b = mean(mu) - x, sigma = 0.5(1+std(mu)) I
// unit_noise:     b = 0, sigma = I                      (free Brownian benchmark)
inline CoefficientSet make_preset_coefficients(const std::string& preset, std::size_t dim,
                                               double domain_radius = 2.0) {
    const std::size_t m = dim;
    if (preset == "zero") {
        VectorKernel b;
        MatrixKernel s;
        return make_kernel_coefficients(dim, m, b, s, [](double) { return 0.0; }, 1.0, "zero");
    }
    if (preset == "mean_reversion") {
        VectorKernel b;
        b.self_term = [dim](double, const Vec& x) {
            Vec v(dim);
            for (std::size_t i = 0; i < dim; ++i) v[i] = -x[i];
            return v;
        };
        b.pair_term = [](double, const Vec&, const Vec& y) { return y; };
        MatrixKernel s;
        s.self_term = [dim, m](double, const Vec&) { return Mat::scaled_identity(dim, m, 0.4); };
        return make_kernel_coefficients(dim, m, b, s, [](double) { return 2.0; },
                                        2.0 * domain_radius + 1.0, "mean_reversion");
    }
    if (preset == "std_vol") {
        CoefficientSet cs;
        cs.dim = dim;
        cs.noise_dim = m;
        cs.drift = [dim](double, const Vec& x, const EmpiricalMeasure& mu) {
            Vec v = mu.mean();
            for (std::size_t i = 0; i < dim; ++i) v[i] -= x[i];
            return v;
        };
        cs.diffusion = [dim, m](double, const Vec&, const EmpiricalMeasure& mu) {
            return Mat::scaled_identity(dim, m, 0.5 * (1.0 + mu.std_dev()));
        };
        cs.lipschitz_envelope = [](double) { return 3.0; };
        cs.growth_constant = 2.0 * domain_radius + 1.0;
        cs.name = "std_vol";
        return cs;
    }
    if (preset == "unit_noise") {
        VectorKernel b;
        MatrixKernel s;
        s.self_term = [dim, m](double, const Vec&) { return Mat::identity(dim, m); };
        return make_kernel_coefficients(dim, m, b, s, [](double) { return 0.0; },
                                        std::sqrt(static_cast<double>(dim)) + 1.0, "unit_noise");
    }
    throw Error(ErrorCode::config, "unknown coefficient preset '" + preset + "'");
}

// ---------------------------------------------------------------------------
// Assumption probes
// ---------------------------------------------------------------------------

struct LipschitzReport {
    double max_quotient = 0.0;
    double envelope_floor = 0.0;  // min of L over the sampled times
    std::size_t n_pairs = 0;
    std::size_t n_violations = 0; // quotient > L(t) (1 + tol)
    bool ok() const { return n_violations == 0; }
};

namespace detail {

inline Vec sample_in_section(const TimeDomain& domain, double t, CounterRng& rng, int max_tries = 256) {
    for (int k = 0; k < max_tries; ++k) {
        Vec x(domain.dim);
        for (double& v : x) v = rng.uniform(-domain.bounding_radius, domain.bounding_radius);
        if (domain.dist(t, x) <= 0.0) return x;
    }
    // Sections are nonempty; fall back to a boundary anchor of the origin.
    return nearest_boundary(domain, t, zeros(domain.dim)).point;
}

inline EmpiricalMeasure sample_measure_in_section(const TimeDomain& domain, double t, CounterRng& rng,
                                                  std::size_t max_atoms = 16) {
    const std::size_t n = 1 + rng.index(max_atoms);
    std::vector<Vec> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) pts.push_back(sample_in_section(domain, t, rng));
    return EmpiricalMeasure::uniform(std::move(pts));
}

} // namespace detail

// Samples joint (x, mu) pairs inside the moving sections and reports the
// worst Lipschitz quotient against the declared envelope. Violations are
// data, not errors.
inline LipschitzReport lipschitz_probe(const CoefficientSet& cs, const TimeDomain& domain,
                                       std::size_t n_pairs, std::uint64_t seed) {
    if (n_pairs < 1) throw Error(ErrorCode::argument, "n_pairs must be >= 1");
    LipschitzReport report;
    report.n_pairs = n_pairs;
    report.envelope_floor = std::numeric_limits<double>::infinity();
    CounterRng rng(derive_seed(seed, "coefficients.lipschitz_probe"));
    const double tol = 1e-6;

    for (std::size_t k = 0; k < n_pairs; ++k) {
        const double t = rng.uniform(0.0, domain.horizon);
        const Vec x = detail::sample_in_section(domain, t, rng);
        const Vec y = detail::sample_in_section(domain, t, rng);
        const EmpiricalMeasure mu = detail::sample_measure_in_section(domain, t, rng);
        const EmpiricalMeasure nu = detail::sample_measure_in_section(domain, t, rng);

        const double denom = dist(x, y) + wasserstein2(mu, nu).distance;
        if (denom <= 1e-12) continue;
        const double num = dist(eval_drift(cs, t, x, mu), eval_drift(cs, t, y, nu)) +
                           hs_dist(eval_diffusion(cs, t, x, mu), eval_diffusion(cs, t, y, nu));
        const double quotient = num / denom;
        report.max_quotient = std::max(report.max_quotient, quotient);
        const double L = cs.lipschitz_envelope(t);
        report.envelope_floor = std::min(report.envelope_floor, L);
        if (quotient > L * (1.0 + tol) + 1e-12) ++report.n_violations;
    }
    return report;
}

struct GrowthReport {
    double max_ratio = 0.0;  // (||b|| + ||sigma||) / (C (1 + L(t)))
    std::size_t n_samples = 0;
    std::size_t n_violations = 0;
    bool ok() const { return n_violations == 0; }
};

// Checks ||b|| + ||sigma|| <= C (1 + L(t)) at sampled in-section points.
inline GrowthReport growth_probe(const CoefficientSet& cs, const TimeDomain& domain,
                                 std::size_t n_samples, std::uint64_t seed) {
    GrowthReport report;
    report.n_samples = n_samples;
    CounterRng rng(derive_seed(seed, "coefficients.growth_probe"));
    for (std::size_t k = 0; k < n_samples; ++k) {
        const double t = rng.uniform(0.0, domain.horizon);
        const Vec x = detail::sample_in_section(domain, t, rng);
        const EmpiricalMeasure mu = detail::sample_measure_in_section(domain, t, rng);
        const double size = norm(eval_drift(cs, t, x, mu)) + eval_diffusion(cs, t, x, mu).hs_norm();
        const double bound = cs.growth_constant * (1.0 + cs.lipschitz_envelope(t));
        report.max_ratio = std::max(report.max_ratio, size / bound);
        if (size > bound * (1.0 + 1e-9)) ++report.n_violations;
    }
    return report;
}

} // namespace mvreflect
