#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace dhz {

// Runs fn(i) for i in [0, n) across worker threads. Callers must make each
// index write only its own output slot; reductions stay with the caller so
// float sums keep a fixed order. DEHAZEKIT_THREADS=1 forces serial execution.
inline void parallel_for(int64_t n, const std::function<void(int64_t)>& fn) {
    if (n <= 0) return;
    unsigned hw = std::thread::hardware_concurrency();
    if (const char* env = std::getenv("DEHAZEKIT_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v > 0) hw = static_cast<unsigned>(v);
    }
    if (hw == 0) hw = 1;
    unsigned workers = static_cast<unsigned>(std::min<int64_t>(n, hw));
    if (workers <= 1) {
        for (int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int64_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr err;
    std::atomic<bool> failed{false};
    for (unsigned t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                int64_t i = next.fetch_add(1);
                if (i >= n || failed.load()) return;
                try {
                    fn(i);
                } catch (...) {
                    if (!failed.exchange(true)) err = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failed.load() && err) std::rethrow_exception(err);
}

} // namespace dhz
