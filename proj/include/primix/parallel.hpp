#pragma once

#include <functional>
#include <thread>
#include <vector>

#include "primix/types.hpp"

namespace primix {

/// Static-chunked parallel loop. fn(i) must write only to slot i state so the
/// result is identical for any thread count (including 1).
inline void parallel_for(Index n, int threads, const std::function<void(Index)>& fn) {
    int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    if (workers == 1 || n < 2 * workers) {
        for (Index i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    const Index chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const Index begin = w * chunk;
        const Index end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([begin, end, &fn] {
            for (Index i = begin; i < end; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace primix
