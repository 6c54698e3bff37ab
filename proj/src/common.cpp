#include "ss2r/common.hpp"

#include <algorithm>
#include <cstdlib>

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace ss2r {

namespace {

// Tensor buffers are multi-megabyte and churn fast; keep them on the heap
// freelist instead of mmap round-trips.
[[maybe_unused]] const bool g_malloc_tuned = [] {
#ifdef __GLIBC__
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
    return true;
}();

int default_threads() {
    if (const char* env = std::getenv("SS2R_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

std::atomic<int> g_threads{0};

}  // namespace

int num_threads() {
    int n = g_threads.load();
    if (n == 0) {
        n = default_threads();
        g_threads.store(n);
    }
    return n;
}

void set_num_threads(int n) {
    g_threads.store(std::max(1, n));
}

namespace {
thread_local bool t_in_parallel = false;
}

void parallel_for(int64_t n, int64_t grain, const std::function<void(int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    grain = std::max<int64_t>(1, grain);
    int64_t n_chunks = (n + grain - 1) / grain;
    int workers = static_cast<int>(std::min<int64_t>(num_threads(), n_chunks));
    if (workers <= 1 || t_in_parallel) {
        fn(0, n);
        return;
    }
    std::atomic<int64_t> next{0};
    auto drain = [&] {
        t_in_parallel = true;
        while (true) {
            int64_t c = next.fetch_add(1);
            if (c >= n_chunks) break;
            int64_t lo = c * grain;
            fn(lo, std::min(n, lo + grain));
        }
        t_in_parallel = false;
    };
    std::vector<std::thread> extra;
    extra.reserve(workers - 1);
    for (int i = 1; i < workers; ++i) extra.emplace_back(drain);
    drain();
    for (auto& t : extra) t.join();
}

}  // namespace ss2r
