#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace trajkit {

/// Runs body(i) for i in [0, n) on up to `workers` threads. Each task must
/// write only to its own output slot, so scheduling order never changes the
/// result. The first exception thrown by any task is rethrown after all
/// workers have drained the queue.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body) {
    if (n == 0) return;
    const int use = std::max(1, std::min(workers, static_cast<int>(n)));
    if (use == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(use));
    for (int w = 0; w < use; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= n) return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace trajkit
