#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "ss2r/common.hpp"

namespace ss2r {

namespace gemm_detail {

// Row-range kernel with 4-way k unrolling. The per-element accumulation
// expression is fixed, so results are identical however the (m, n) space is
// partitioned across threads.
template <typename T>
void rows_nn(bool accumulate, const T* A, const T* B, T* C, int64_t m0, int64_t m1, int64_t n0,
             int64_t n1, int N, int K) {
    for (int64_t m = m0; m < m1; ++m) {
        T* c = C + m * N;
        const T* a = A + m * K;
        if (!accumulate)
            for (int64_t n = n0; n < n1; ++n) c[n] = T(0);
        int k = 0;
        for (; k + 4 <= K; k += 4) {
            T a0 = a[k], a1 = a[k + 1], a2 = a[k + 2], a3 = a[k + 3];
            const T* b0 = B + static_cast<int64_t>(k) * N;
            const T* b1 = b0 + N;
            const T* b2 = b1 + N;
            const T* b3 = b2 + N;
            for (int64_t n = n0; n < n1; ++n)
                c[n] += a0 * b0[n] + a1 * b1[n] + a2 * b2[n] + a3 * b3[n];
        }
        for (; k < K; ++k) {
            T av = a[k];
            const T* b = B + static_cast<int64_t>(k) * N;
            for (int64_t n = n0; n < n1; ++n) c[n] += av * b[n];
        }
    }
}

template <typename T>
void rows_tn(bool accumulate, const T* A, const T* B, T* C, int64_t m0, int64_t m1, int64_t n0,
             int64_t n1, int M, int N, int K) {
    for (int64_t m = m0; m < m1; ++m) {
        T* c = C + m * N;
        if (!accumulate)
            for (int64_t n = n0; n < n1; ++n) c[n] = T(0);
        int k = 0;
        for (; k + 4 <= K; k += 4) {
            T a0 = A[static_cast<int64_t>(k) * M + m];
            T a1 = A[static_cast<int64_t>(k + 1) * M + m];
            T a2 = A[static_cast<int64_t>(k + 2) * M + m];
            T a3 = A[static_cast<int64_t>(k + 3) * M + m];
            const T* b0 = B + static_cast<int64_t>(k) * N;
            const T* b1 = b0 + N;
            const T* b2 = b1 + N;
            const T* b3 = b2 + N;
            for (int64_t n = n0; n < n1; ++n)
                c[n] += a0 * b0[n] + a1 * b1[n] + a2 * b2[n] + a3 * b3[n];
        }
        for (; k < K; ++k) {
            T av = A[static_cast<int64_t>(k) * M + m];
            const T* b = B + static_cast<int64_t>(k) * N;
            for (int64_t n = n0; n < n1; ++n) c[n] += av * b[n];
        }
    }
}

constexpr int64_t kColChunk = 4096;

// Dot product over fixed lanes with a fixed combine tree: vectorizable
// without changing results across runs or thread counts.
template <typename T>
T dot_lanes(const T* a, const T* b, int64_t K) {
    constexpr int L = 16;
    T lanes[L] = {};
    int64_t k = 0;
    for (; k + L <= K; k += L)
        for (int j = 0; j < L; ++j) lanes[j] += a[k + j] * b[k + j];
    T tail = T(0);
    for (; k < K; ++k) tail += a[k] * b[k];
    for (int w = L / 2; w >= 1; w /= 2)
        for (int j = 0; j < w; ++j) lanes[j] += lanes[j + w];
    return lanes[0] + tail;
}

}  // namespace gemm_detail

// C[M,N] (+)= A[M,K] * B[K,N], all row-major.
template <typename T>
void gemm_nn(bool accumulate, const T* A, const T* B, T* C, int M, int N, int K) {
    using namespace gemm_detail;
    if (N >= 2 * kColChunk) {
        int64_t chunks = (N + kColChunk - 1) / kColChunk;
        parallel_for(chunks, 1, [&](int64_t lo, int64_t hi) {
            for (int64_t cb = lo; cb < hi; ++cb) {
                int64_t n0 = cb * kColChunk;
                rows_nn(accumulate, A, B, C, 0, M, n0, std::min<int64_t>(N, n0 + kColChunk), N, K);
            }
        });
    } else {
        parallel_for(M, 4, [&](int64_t lo, int64_t hi) {
            rows_nn(accumulate, A, B, C, lo, hi, 0, N, N, K);
        });
    }
}

// C[M,N] (+)= A[K,M]^T * B[K,N]
template <typename T>
void gemm_tn(bool accumulate, const T* A, const T* B, T* C, int M, int N, int K) {
    using namespace gemm_detail;
    if (N >= 2 * kColChunk) {
        int64_t chunks = (N + kColChunk - 1) / kColChunk;
        parallel_for(chunks, 1, [&](int64_t lo, int64_t hi) {
            for (int64_t cb = lo; cb < hi; ++cb) {
                int64_t n0 = cb * kColChunk;
                rows_tn(accumulate, A, B, C, 0, M, n0, std::min<int64_t>(N, n0 + kColChunk), M, N,
                        K);
            }
        });
    } else {
        parallel_for(M, 4, [&](int64_t lo, int64_t hi) {
            rows_tn(accumulate, A, B, C, lo, hi, 0, N, M, N, K);
        });
    }
}

// C[M,N] (+)= A[M,K] * B[N,K]^T  (dot products along K)
template <typename T>
void gemm_nt(bool accumulate, const T* A, const T* B, T* C, int M, int N, int K) {
    parallel_for(M, 8, [&](int64_t lo, int64_t hi) {
        for (int64_t m = lo; m < hi; ++m) {
            const T* a = A + m * K;
            T* c = C + m * N;
            for (int n = 0; n < N; ++n) {
                const T* b = B + static_cast<int64_t>(n) * K;
                T acc = gemm_detail::dot_lanes(a, b, K);
                c[n] = accumulate ? c[n] + acc : acc;
            }
        }
    });
}

// gemm_nt for small M*N and large K: parallel over fixed K chunks with an
// ordered partial reduction, so results do not depend on the thread count.
template <typename T>
void gemm_nt_ksplit(bool accumulate, const T* A, const T* B, T* C, int M, int N, int64_t K) {
    constexpr int64_t kChunk = 16384;
    int64_t chunks = (K + kChunk - 1) / kChunk;
    if (chunks <= 1) {
        gemm_nt(accumulate, A, B, C, M, N, static_cast<int>(K));
        return;
    }
    std::vector<T> partial(static_cast<size_t>(chunks) * M * N);
    parallel_for(chunks, 1, [&](int64_t lo, int64_t hi) {
        for (int64_t cb = lo; cb < hi; ++cb) {
            int64_t k0 = cb * kChunk;
            int64_t k1 = std::min(K, k0 + kChunk);
            T* p = partial.data() + cb * M * N;
            for (int m = 0; m < M; ++m) {
                const T* a = A + m * K;
                for (int n = 0; n < N; ++n) {
                    const T* b = B + static_cast<int64_t>(n) * K;
                    p[m * N + n] = gemm_detail::dot_lanes(a + k0, b + k0, k1 - k0);
                }
            }
        }
    });
    for (int64_t i = 0; i < static_cast<int64_t>(M) * N; ++i) {
        T acc = accumulate ? C[i] : T(0);
        for (int64_t cb = 0; cb < chunks; ++cb) acc += partial[cb * M * N + i];
        C[i] = acc;
    }
}

}  // namespace ss2r
