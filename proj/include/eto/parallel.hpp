#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace eto {

/// Index-based parallel loop. Work items must be independent; results keyed
/// by index stay deterministic regardless of scheduling. jobs <= 1 runs
/// inline.
template <typename F>
void parallel_for(std::size_t count, unsigned jobs, F&& body) {
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    const unsigned n = std::min<std::size_t>(jobs, count);
    workers.reserve(n);
    for (unsigned t = 0; t < n; ++t) {
        workers.emplace_back([&] {
            while (!failed.load(std::memory_order_relaxed)) {
                const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= count) break;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    failed.store(true, std::memory_order_relaxed);
                }
            }
        });
    }
    for (auto& w : workers) w.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace eto
