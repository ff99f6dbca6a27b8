#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mvreflect/errors.hpp"
#include "mvreflect/linalg.hpp"

namespace mvreflect {

// Weighted point cloud in R^d. Weights sum to one within 1e-12.
//
// Atom sums (means, kernel integrals) accumulate in a canonical order sorted
// by atom value, so that relabeling the atoms - e.g. permuting particles in
// an ensemble - reproduces results bit for bit.
class EmpiricalMeasure {
public:
    EmpiricalMeasure() = default;

    EmpiricalMeasure(std::vector<Vec> points, std::vector<double> weights)
        : points_(std::move(points)), weights_(std::move(weights)) {
        validate();
        build_order();
    }

    static EmpiricalMeasure uniform(std::vector<Vec> points) {
        if (points.empty()) throw Error(ErrorCode::argument, "empirical measure needs at least one atom");
        std::vector<double> w(points.size(), 1.0 / static_cast<double>(points.size()));
        return EmpiricalMeasure(std::move(points), std::move(w));
    }

    static EmpiricalMeasure dirac(Vec p) { return uniform({std::move(p)}); }

    std::size_t size() const { return points_.size(); }
    std::size_t dim() const { return points_.empty() ? 0 : points_[0].size(); }
    const std::vector<Vec>& points() const { return points_; }
    const std::vector<double>& weights() const { return weights_; }
    const Vec& point(std::size_t i) const { return points_[i]; }
    double weight(std::size_t i) const { return weights_[i]; }

    // Atom indices in canonical (lexicographic) order.
    const std::vector<std::size_t>& canonical_order() const { return order_; }

    Vec mean() const {
        Vec m = zeros(dim());
        for (std::size_t i : order_) axpy(m, weights_[i], points_[i]);
        return m;
    }

    // Population standard deviation: sqrt(E||X||^2 - ||E X||^2).
    double std_dev() const {
        const Vec m = mean();
        double second = 0.0;
        for (std::size_t i : order_) second += weights_[i] * dot(points_[i], points_[i]);
        const double var = second - dot(m, m);
        return std::sqrt(std::max(var, 0.0));
    }

    double second_moment() const {
        double s = 0.0;
        for (std::size_t i : order_) s += weights_[i] * dot(points_[i], points_[i]);
        return s;
    }

private:
    void validate() const {
        if (points_.empty()) throw Error(ErrorCode::argument, "empirical measure needs at least one atom");
        if (weights_.size() != points_.size())
            throw Error(ErrorCode::argument, "weights/points size mismatch");
        const std::size_t d = points_[0].size();
        double total = 0.0;
        for (std::size_t i = 0; i < points_.size(); ++i) {
            if (points_[i].size() != d) throw Error(ErrorCode::shape, "mixed atom dimensions");
            if (weights_[i] < 0.0) throw Error(ErrorCode::argument, "negative weight");
            total += weights_[i];
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw Error(ErrorCode::argument, "weights must sum to 1 within 1e-12");
    }

    void build_order() {
        order_.resize(points_.size());
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        std::sort(order_.begin(), order_.end(), [this](std::size_t a, std::size_t b) {
            if (points_[a] != points_[b]) return points_[a] < points_[b];
            return weights_[a] < weights_[b];
        });
    }

    std::vector<Vec> points_;
    std::vector<double> weights_;
    std::vector<std::size_t> order_;
};

// Time-indexed family of empirical measures, one per grid node.
struct MeasureFlow {
    std::vector<double> times;
    std::vector<EmpiricalMeasure> measures;

    std::size_t n_nodes() const { return times.size(); }

    const EmpiricalMeasure& at_node(std::size_t k) const {
        if (k >= measures.size()) throw Error(ErrorCode::argument, "flow node out of range");
        return measures[k];
    }

    static MeasureFlow dirac_flow(const std::vector<double>& times, const std::vector<Vec>& states) {
        if (times.size() != states.size())
            throw Error(ErrorCode::argument, "dirac flow: times/states size mismatch");
        MeasureFlow f;
        f.times = times;
        f.measures.reserve(states.size());
        for (const Vec& x : states) f.measures.push_back(EmpiricalMeasure::dirac(x));
        return f;
    }
};

} // namespace mvreflect
