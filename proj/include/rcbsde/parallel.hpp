#pragma once

#include <algorithm>
#include <cstdint>
#include <thread>
#include <vector>

namespace rcbsde {

// Runs fn(begin, end) over a partition of [0, count). Workers write to
// disjoint index ranges only; reductions stay with the caller, so results are
// identical for any worker count.
template <typename Fn>
void parallel_for(int64_t count, int workers, Fn&& fn) {
    workers = std::max(1, workers);
    if (workers == 1 || count < 2048) {
        fn(int64_t(0), count);
        return;
    }
    const int64_t chunk = (count + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(size_t(workers));
    for (int t = 0; t < workers; ++t) {
        const int64_t lo = std::min<int64_t>(count, t * chunk);
        const int64_t hi = std::min<int64_t>(count, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace rcbsde
