#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "mvreflect/errors.hpp"

namespace mvreflect {

// Points and states live in low-dimensional R^d; a plain vector keeps the
// callable interfaces (distance functions, coefficient kernels) simple.
using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double sq_dist(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double dist(const Vec& a, const Vec& b) { return std::sqrt(sq_dist(a, b)); }

inline Vec operator+(Vec a, const Vec& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

inline Vec operator-(Vec a, const Vec& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
    return a;
}

inline Vec operator*(double c, Vec a) {
    for (double& v : a) v *= c;
    return a;
}

inline Vec& operator+=(Vec& a, const Vec& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

inline Vec& axpy(Vec& y, double c, const Vec& x) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += c * x[i];
    return y;
}

// Returns a/|a|, or the zero vector when |a| <= floor.
inline Vec normalized(const Vec& a, double floor = 0.0) {
    const double n = norm(a);
    if (n <= floor) return Vec(a.size(), 0.0);
    Vec r = a;
    for (double& v : r) v /= n;
    return r;
}

inline Vec zeros(std::size_t d) { return Vec(d, 0.0); }

// Dense row-major matrix, sized d x m. Used for diffusion coefficients; d and
// m stay in single digits so no BLAS is warranted.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

    static Mat identity(std::size_t r, std::size_t c) {
        Mat m(r, c);
        for (std::size_t i = 0; i < r && i < c; ++i) m(i, i) = 1.0;
        return m;
    }

    static Mat scaled_identity(std::size_t r, std::size_t c, double s) {
        Mat m(r, c);
        for (std::size_t i = 0; i < r && i < c; ++i) m(i, i) = s;
        return m;
    }

    // Hilbert-Schmidt (Frobenius) norm.
    double hs_norm() const {
        double s = 0.0;
        for (double v : a) s += v * v;
        return std::sqrt(s);
    }
};

inline Vec mat_vec(const Mat& m, const Vec& x) {
    if (x.size() != m.cols)
        throw Error(ErrorCode::shape, "matrix-vector size mismatch");
    Vec y(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) s += m.a[i * m.cols + j] * x[j];
        y[i] = s;
    }
    return y;
}

// y += s * (M x), no allocation.
inline void add_mat_vec(Vec& y, double s, const Mat& m, const Vec& x) {
    if (x.size() != m.cols || y.size() != m.rows)
        throw Error(ErrorCode::shape, "matrix-vector size mismatch");
    for (std::size_t i = 0; i < m.rows; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) acc += m.a[i * m.cols + j] * x[j];
        y[i] += s * acc;
    }
}

inline double hs_dist(const Mat& a, const Mat& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.a.size(); ++i) {
        const double d = a.a[i] - b.a[i];
        s += d * d;
    }
    return std::sqrt(s);
}

} // namespace mvreflect
