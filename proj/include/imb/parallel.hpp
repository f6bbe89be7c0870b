#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace imb {

// Worker count: hardware concurrency capped by the IMB_LAB_THREADS
// environment variable (<= 0 or unset means no cap).
inline int resolve_threads() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
    if (const char* env = std::getenv("IMB_LAB_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1 && cap < n) n = cap;
    }
    return n;
}

// Runs fn(block_index, begin, end) over fixed-size blocks of [0, n). Blocks
// are claimed dynamically but identified by index, so callers that write
// per-block slots and merge them in index order stay deterministic no matter
// the thread count.
inline void parallel_for_blocks(std::size_t n, std::size_t block,
                                const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t n_blocks = (n + block - 1) / block;
    const int n_threads = std::min<std::size_t>(resolve_threads(), n_blocks);
    if (n_threads <= 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) fn(b, b * block, std::min(n, (b + 1) * block));
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= n_blocks || failed.load()) return;
            try {
                fn(b, b * block, std::min(n, (b + 1) * block));
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (failed.load() && error) std::rethrow_exception(error);
}

}  // namespace imb
