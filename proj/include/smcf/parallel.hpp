#pragma once

// Deterministic data-parallel helpers.
//
// Work is split into chunks whose boundaries depend only on the range size,
// never on the worker count, and every chunk writes to disjoint output slots.
// Results are therefore bit-identical for any --jobs setting.

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace smcf {

inline int& worker_cap() {
    static int cap = [] {
        if (const char* env = std::getenv("SMCF_THREADS")) {
            int v = std::atoi(env);
            if (v > 0) return v;
        }
        return 1;
    }();
    return cap;
}

inline void set_workers(int n) { worker_cap() = std::max(1, n); }

// SMCF_THREADS wins over --jobs / config values
inline void set_workers_respecting_env(int n) {
    if (!std::getenv("SMCF_THREADS")) set_workers(n);
}

// Invokes fn(i) for i in [0, n). Chunk layout is independent of worker count.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const int workers = std::min<std::size_t>(worker_cap(), n == 0 ? 1 : n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace smcf
