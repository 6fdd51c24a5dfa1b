#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace invdiff {

/// Process-wide cap on worker threads (CLI --threads). 0 means hardware
/// concurrency.
void set_max_threads(int n);
int max_threads();

/// Runs fn(i) for i in [begin, end) on up to max_threads() workers.
/// Work is split into one contiguous range per worker; every index is handled
/// by exactly one invocation, so results must not depend on which worker runs
/// an index. This keeps outputs identical for any thread count.
template <typename Fn>
void parallel_for(std::size_t begin, std::size_t end, Fn&& fn) {
    const std::size_t n = end > begin ? end - begin : 0;
    if (n == 0) return;
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(max_threads()), n);
    if (workers <= 1) {
        for (std::size_t i = begin; i < end; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = begin + w * chunk;
        const std::size_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace invdiff
