#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ss2r {

int num_threads();
void set_num_threads(int n);

// Chunked parallel loop. Chunk boundaries depend only on (n, grain), never on
// the worker count, and chunks must write disjoint data; results are then
// identical for any thread setting.
void parallel_for(int64_t n, int64_t grain, const std::function<void(int64_t, int64_t)>& fn);

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Reusable per-thread scratch buffers; callers pick distinct slots for
// buffers that must stay alive at the same time.
template <typename T>
T* scratch_buffer(int slot, int64_t n) {
    thread_local std::vector<T> slots[6];
    auto& v = slots[slot];
    if (static_cast<int64_t>(v.size()) < n) v.resize(n);
    return v.data();
}

}  // namespace ss2r
