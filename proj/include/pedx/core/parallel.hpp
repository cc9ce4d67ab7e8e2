#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace pedx {

namespace detail {
inline std::atomic<int>& thread_override() {
    static std::atomic<int> value{0};
    return value;
}
}  // namespace detail

/// Force the worker count (0 restores the default: PEDX_THREADS, else hardware concurrency).
inline void set_thread_count(int n) { detail::thread_override().store(n); }

inline int thread_count() {
    if (int forced = detail::thread_override().load(); forced > 0) return forced;
    if (const char* env = std::getenv("PEDX_THREADS")) {
        try {
            int n = std::stoi(env);
            if (n > 0) return n;
        } catch (...) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n). Each index writes only its own output slot, so results
/// are independent of how indices are distributed over workers. The first exception
/// (by lowest index) is rethrown after all workers join.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_err;
    std::size_t first_err_index = n;
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(err_mu);
                if (i < first_err_index) {
                    first_err_index = i;
                    first_err = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
    if (first_err) std::rethrow_exception(first_err);
}

}  // namespace pedx
