#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ionsync {

inline unsigned default_threads() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

/// Evaluates fn(i) for i in [0, n) on a small worker pool and returns the
/// results in index order. The first exception thrown by any task is rethrown.
template <class Fn>
auto parallel_map(std::size_t n, unsigned threads, Fn&& fn) {
    using Result = decltype(fn(std::size_t{0}));
    std::vector<Result> results(n);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                results[i] = fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };

    const unsigned count = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    if (count <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(count);
        for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return results;
}

} // namespace ionsync
