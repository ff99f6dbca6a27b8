#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

#include "mvreflect/linalg.hpp"

namespace mvreflect {

// Counter-based randomness. Every random number is a pure function of a
// 64-bit key and a counter, so the draw order never matters: a simulation
// sliced across any number of workers produces the same bits.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (splitmix64(b) + 0x9e3779b97f4a7c15ULL));
}

// FNV-1a, used both for purpose-string keyed sub-seeds and for file manifests.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ULL) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

// Sub-seed derivation: master seed -> (purpose, index) stream key.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose, std::uint64_t index = 0) {
    return mix_keys(mix_keys(master, fnv1a64(purpose)), index);
}

// Uniform in (0,1); never returns exactly 0 or 1.
inline double counter_uniform(std::uint64_t key, std::uint64_t counter) {
    const std::uint64_t bits = splitmix64(key ^ (counter * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Standard normal via Box-Muller on two counter draws.
inline double counter_gaussian(std::uint64_t key, std::uint64_t counter) {
    const double u1 = counter_uniform(key, 2 * counter);
    const double u2 = counter_uniform(key, 2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Small stateful convenience wrapper over the counter stream, for validators
// and samplers that just need a seeded sequence.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    double uniform() { return counter_uniform(key_, next_++); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double gaussian() { return counter_gaussian(key_, next_++); }
    std::uint64_t integer() { return splitmix64(key_ ^ (next_++ * 0xd1342543de82ef95ULL)); }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(integer() % n); }

    Vec gaussian_vec(std::size_t d) {
        Vec v(d);
        for (double& x : v) x = gaussian();
        return v;
    }

    // Uniform direction on the unit sphere in R^d.
    Vec unit_vec(std::size_t d) {
        Vec v = gaussian_vec(d);
        Vec u = normalized(v, 1e-300);
        if (norm(u) == 0.0) { u = zeros(d); u[0] = 1.0; }
        return u;
    }

private:
    std::uint64_t key_;
    std::uint64_t next_ = 0;
};

} // namespace mvreflect
