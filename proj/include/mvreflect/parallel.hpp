#pragma once

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace mvreflect {

// Worker count: explicit argument wins, then the MVREFLECT_WORKERS
// environment variable, then hardware concurrency.
inline std::size_t resolve_workers(std::size_t requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("MVREFLECT_WORKERS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<std::size_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

// Runs fn(i) for i in [0, n). Results must be written to per-index slots;
// chunking is static so the split itself is deterministic, and because all
// randomness is counter-based the outputs do not depend on the worker count.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
    workers = std::min(resolve_workers(workers), std::max<std::size_t>(n, 1));
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace mvreflect
