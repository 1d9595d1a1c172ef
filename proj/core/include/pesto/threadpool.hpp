#pragma once

#include <cstddef>
#include <cstdlib>
#include <thread>
#include <vector>

namespace pesto {

/// Static chunking over [0, n). threads <= 1 runs inline. Results are
/// deterministic for a fixed thread count as long as fn(i) writes only to
/// slot i of its output.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t t = std::min<std::size_t>(std::size_t(threads), n);
    std::vector<std::thread> workers;
    workers.reserve(t);
    for (std::size_t w = 0; w < t; ++w) {
        const std::size_t lo = n * w / t;
        const std::size_t hi = n * (w + 1) / t;
        workers.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : workers) th.join();
}

/// Thread cap fallback: PESTO_THREADS when set, else 1.
inline int default_thread_count() {
    if (const char* env = std::getenv("PESTO_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return 1;
}

} // namespace pesto
