#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace afsl {

/// Runs fn(i) for i in [0, n) across up to num_threads workers in contiguous
/// blocks. Each index must write only its own slots; with that contract the
/// result is identical for any thread count.
template <typename Fn>
void parallel_for(std::size_t n, unsigned num_threads, Fn&& fn) {
    if (n == 0) return;
    if (num_threads <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(num_threads, n);
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([begin, end, &fn] {
            for (std::size_t i = begin; i < end; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace afsl
