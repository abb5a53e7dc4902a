#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace nodfuse {

/// Runs fn(i) for i in [0, n) on up to `workers` threads.
///
/// Callers write results into slot i, so output order never depends on
/// scheduling. The first exception (lowest index) is rethrown after all
/// workers have joined.
template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn)
{
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    std::size_t error_index = n;

    auto body = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (i < error_index) {
                    error_index = i;
                    error = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t count = std::min<std::size_t>(workers, n);
    pool.reserve(count);
    for (std::size_t t = 0; t < count; ++t)
        pool.emplace_back(body);
    for (auto& t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

} // namespace nodfuse
