#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mcga {

inline int resolve_jobs(int jobs) {
    if (jobs > 0) return jobs;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

// Run fn(0..n-1) on a small worker pool. Tasks must write only to their own
// output slots; then results do not depend on the job count or scheduling.
inline void parallel_for_index(long long n, int jobs,
                               const std::function<void(long long)>& fn) {
    if (n <= 0) return;
    const int workers = std::min<long long>(resolve_jobs(jobs), n);
    if (workers <= 1) {
        for (long long k = 0; k < n; ++k) fn(k);
        return;
    }
    std::atomic<long long> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                const long long k = next.fetch_add(1);
                if (k >= n) return;
                try {
                    fn(k);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace mcga
