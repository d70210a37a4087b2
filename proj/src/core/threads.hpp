#ifndef E2I_CORE_THREADS_HPP
#define E2I_CORE_THREADS_HPP

#include <cstdlib>
#include <thread>
#include <vector>

namespace e2i {

// Worker count for data-parallel loops, capped by EEG2IMAGE_THREADS.
inline int worker_count() {
    static const int cached = [] {
        int n = static_cast<int>(std::thread::hardware_concurrency());
        if (n < 1) n = 1;
        if (const char* env = std::getenv("EEG2IMAGE_THREADS")) {
            const int cap = std::atoi(env);
            if (cap >= 1 && cap < n) n = cap;
        }
        return n;
    }();
    return cached;
}

// Runs fn(begin, end) over contiguous chunks of [0, n). Only used for loops
// whose chunks write disjoint outputs, so results do not depend on the
// worker count.
template <class F>
void parallel_for(int64_t n, F&& fn) {
    const int workers = static_cast<int>(std::min<int64_t>(worker_count(), n));
    if (workers <= 1) {
        if (n > 0) fn(int64_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers - 1));
    const int64_t chunk = (n + workers - 1) / workers;
    for (int w = 1; w < workers; ++w) {
        const int64_t b = w * chunk, e = std::min<int64_t>(n, (w + 1) * chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    fn(int64_t{0}, std::min<int64_t>(n, chunk));
    for (auto& t : pool) t.join();
}

}  // namespace e2i

#endif
