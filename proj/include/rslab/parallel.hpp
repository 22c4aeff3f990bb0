#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace rslab {

namespace detail {
inline std::atomic<unsigned>& thread_cap() {
    static std::atomic<unsigned> cap{std::max(1u, std::thread::hardware_concurrency())};
    return cap;
}
}  // namespace detail

inline void set_threads(unsigned n) { detail::thread_cap() = std::max(1u, n); }
inline unsigned threads() { return detail::thread_cap(); }

// Runs fn(i) for i in [0, n) over contiguous blocks. Each index is handled exactly once and
// results are expected in per-index slots, so the output never depends on the thread count.
// The exception from the lowest failing block is rethrown.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    unsigned t = static_cast<unsigned>(std::min<std::size_t>(threads(), n));
    if (t <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(t);
    std::vector<std::thread> pool;
    for (unsigned b = 0; b < t; ++b)
        pool.emplace_back([&, b] {
            try {
                for (std::size_t i = n * b / t; i < n * (b + 1) / t; ++i) fn(i);
            } catch (...) {
                errors[b] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace rslab
