#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>

#include "ss2r/gemm.hpp"
#include "ss2r/tensor.hpp"

namespace ss2r::ops {

namespace detail {

template <typename T>
void record(TensorT<T>& out, std::initializer_list<const TensorT<T>*> inputs,
            typename GradTape<T>::BackwardFn fn) {
    GradTape<T>* tape = active_tape<T>();
    if (!tape) return;
    std::vector<int> ids;
    ids.reserve(inputs.size());
    bool any = false;
    for (const TensorT<T>* t : inputs) {
        int id = tape->node_of(*t);
        ids.push_back(id);
        any |= id >= 0;
    }
    if (!any) return;
    out.node = tape->record(std::move(ids), out.size(), std::move(fn));
    out.gen = tape->gen();
}

template <typename T>
void same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
    check(a.shape() == b.shape(),
          std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

constexpr int64_t kEwGrain = 16384;

// elementwise accumulate helper: disjoint chunks, thread-count independent
template <typename T, typename F>
void ew_apply(int64_t n, F&& f) {
    parallel_for(n, kEwGrain, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) f(i);
    });
}

inline double sigmoid_d(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// precision-matched sigmoid; the float path vectorizes with libmvec
inline float sigmoid_s(float x) { return 1.0f / (1.0f + expf(-x)); }
inline double sigmoid_s(double x) { return sigmoid_d(x); }

}  // namespace detail

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
    detail::same_shape(a, b, "add");
    TensorT<T> out(a.shape());
    const T *pa = a.data(), *pb = b.data();
    T* po = out.data();
    detail::ew_apply<T>(out.size(), [&](int64_t i) { po[i] = pa[i] + pb[i]; });
    detail::record<T>(out, {&a, &b}, [](const std::vector<T>& g, std::vector<std::vector<T>*>& gi) {
        for (int j = 0; j < 2; ++j)
            if (gi[j]) {
                T* d = gi[j]->data();
                detail::ew_apply<T>(g.size(), [&](int64_t i) { d[i] += g[i]; });
            }
    });
    return out;
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
    detail::same_shape(a, b, "sub");
    TensorT<T> out(a.shape());
    const T *pa = a.data(), *pb = b.data();
    T* po = out.data();
    detail::ew_apply<T>(out.size(), [&](int64_t i) { po[i] = pa[i] - pb[i]; });
    detail::record<T>(out, {&a, &b}, [](const std::vector<T>& g, std::vector<std::vector<T>*>& gi) {
        if (gi[0]) {
            T* d = gi[0]->data();
            detail::ew_apply<T>(g.size(), [&](int64_t i) { d[i] += g[i]; });
        }
        if (gi[1]) {
            T* d = gi[1]->data();
            detail::ew_apply<T>(g.size(), [&](int64_t i) { d[i] -= g[i]; });
        }
    });
    return out;
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
    detail::same_shape(a, b, "mul");
    TensorT<T> out(a.shape());
    const T *pa = a.data(), *pb = b.data();
    T* po = out.data();
    detail::ew_apply<T>(out.size(), [&](int64_t i) { po[i] = pa[i] * pb[i]; });
    detail::record<T>(out, {&a, &b},
                      [a, b](const std::vector<T>& g, std::vector<std::vector<T>*>& gi) {
                          if (gi[0]) {
                              const T* pb2 = b.data();
                              T* d = gi[0]->data();
                              detail::ew_apply<T>(g.size(), [&](int64_t i) { d[i] += g[i] * pb2[i]; });
                          }
                          if (gi[1]) {
                              const T* pa2 = a.data();
                              T* d = gi[1]->data();
                              detail::ew_apply<T>(g.size(), [&](int64_t i) { d[i] += g[i] * pa2[i]; });
                          }
                      });
    return out;
}

template <typename T>
TensorT<T> scale(const TensorT<T>& a, T s) {
    TensorT<T> out(a.shape());
    const T* pa = a.data();
    T* po = out.data();
    for (int64_t i = 0; i < out.size(); ++i) po[i] = pa[i] * s;
    detail::record<T>(out, {&a}, [s](const std::vector<T>& g, std::vector<std::vector<T>*>& gi) {
        if (gi[0])
            for (size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * s;
    });
    return out;
}

template <typename T>
TensorT<T> add_scalar(const TensorT<T>& a, T s) {
    TensorT<T> out(a.shape());
    const T* pa = a.data();
    T* po = out.data();
    for (int64_t i = 0; i < out.size(); ++i) po[i] = pa[i] + s;
    detail::record<T>(out, {&a}, [](const std::vector<T>& g, std::vector<std::vector<T>*>& gi) {
        if (gi[0])
            for (size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
    });
    return out;
}

// sigmoid-weighted linear activation: x * sigmoid(x)
template <typename T>
TensorT<T> silu(const TensorT<T>& a) {
    TensorT<T> out(a.shape());
    const T* pa = a.data();
    T* po = out.data();
    detail::ew_apply<T>(out.size(), [&](int64_t i) {
        T s = detail::sigmoid_s(pa[i]);
        po[i] = pa[i] * s;
    });
    detail::record<T>(out, {&a}, [a](const std::vector<T>& g, std::vector<std::vector<T>*>& gi) {
        if (!gi[0]) return;
        const T* pa2 = a.data();
        T* d = gi[0]->data();
        detail::ew_apply<T>(g.size(), [&](int64_t i) {
            T x = pa2[i];
            T s = detail::sigmoid_s(x);
            d[i] += g[i] * (s * (T(1) + x * (T(1) - s)));
        });
    });
    return out;
}

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& a) {
    TensorT<T> out(a.shape());
    const T* pa = a.data();
    T* po = out.data();
    detail::ew_apply<T>(out.size(), [&](int64_t i) { po[i] = detail::sigmoid_s(pa[i]); });
    TensorT<T> saved = out;
    detail::record<T>(out, {&a},
                      [saved](const std::vector<T>& g, std::vector<std::vector<T>*>& gi) {
                          if (!gi[0]) return;
                          const T* py = saved.data();
                          for (size_t i = 0; i < g.size(); ++i)
                              (*gi[0])[i] += g[i] * py[i] * (T(1) - py[i]);
                      });
    return out;
}

template <typename T>
TensorT<T> sum(const TensorT<T>& a) {
    double acc = 0;
    const T* pa = a.data();
    for (int64_t i = 0; i < a.size(); ++i) acc += static_cast<double>(pa[i]);
    TensorT<T> out = TensorT<T>::scalar(static_cast<T>(acc));
    detail::record<T>(out, {&a}, [](const std::vector<T>& g, std::vector<std::vector<T>*>& gi) {
        if (gi[0])
            for (T& v : *gi[0]) v += g[0];
    });
    return out;
}

template <typename T>
TensorT<T> mean(const TensorT<T>& a) {
    return scale(sum(a), static_cast<T>(1.0 / static_cast<double>(a.size())));
}

template <typename T>
TensorT<T> reshape(const TensorT<T>& a, std::vector<int> shape) {
    TensorT<T> out = a.viewed(std::move(shape));
    out.node = -1;
    out.gen = 0;
    GradTape<T>* tape = active_tape<T>();
    if (tape) {
        int id = tape->node_of(a);
        if (id >= 0) {
            out.node = tape->record({id}, out.size(),
                                    [](const std::vector<T>& g, std::vector<std::vector<T>*>& gi) {
                                        if (gi[0])
                                            for (size_t i = 0; i < g.size(); ++i)
                                                (*gi[0])[i] += g[i];
                                    });
            out.gen = tape->gen();
        }
    }
    return out;
}

// concatenate along axis 1 of [N, C, ...] tensors with equal trailing dims
template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
    check(a.rank() == b.rank() && a.rank() >= 2, "concat: rank mismatch");
    check(a.dim(0) == b.dim(0), "concat: batch mismatch");
    int64_t inner_a = 1, inner_b = 1;
    for (int i = 2; i < a.rank(); ++i) {
        check(a.dim(i) == b.dim(i), "concat: trailing dim mismatch");
        inner_a *= a.dim(i);
        inner_b *= b.dim(i);
    }
    int n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
    std::vector<int> oshape = a.shape();
    oshape[1] = ca + cb;
    TensorT<T> out(oshape);
    int64_t sa = ca * inner_a, sb = cb * inner_b;
    const T *pa = a.data(), *pb = b.data();
    T* po = out.data();
    for (int i = 0; i < n; ++i) {
        std::memcpy(po + i * (sa + sb), pa + i * sa, sa * sizeof(T));
        std::memcpy(po + i * (sa + sb) + sa, pb + i * sb, sb * sizeof(T));
    }
    detail::record<T>(out, {&a, &b},
                      [n, sa, sb](const std::vector<T>& g, std::vector<std::vector<T>*>& gi) {
                          for (int i = 0; i < n; ++i) {
                              const T* gsrc = g.data() + i * (sa + sb);
                              if (gi[0])
                                  for (int64_t j = 0; j < sa; ++j)
                                      (*gi[0])[i * sa + j] += gsrc[j];
                              if (gi[1])
                                  for (int64_t j = 0; j < sb; ++j)
                                      (*gi[1])[i * sb + j] += gsrc[sa + j];
                          }
                      });
    return out;
}

// fully connected: x[M,K] * w[K,N] + b[N]
template <typename T>
TensorT<T> dense(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
    check(x.rank() == 2 && w.rank() == 2, "dense: expects rank-2 inputs");
    check(x.dim(1) == w.dim(0), "dense: inner dim mismatch " + x.shape_str() + " vs " + w.shape_str());
    int M = x.dim(0), K = x.dim(1), N = w.dim(1);
    bool has_bias = b.defined();
    if (has_bias) check(b.rank() == 1 && b.dim(0) == N, "dense: bias shape mismatch");
    TensorT<T> out({M, N});
    gemm_nn(false, x.data(), w.data(), out.data(), M, N, K);
    if (has_bias) {
        T* po = out.data();
        const T* pb = b.data();
        for (int m = 0; m < M; ++m)
            for (int n = 0; n < N; ++n) po[m * N + n] += pb[n];
    }
    detail::record<T>(out, {&x, &w, &b},
                      [x, w, M, K, N](const std::vector<T>& g, std::vector<std::vector<T>*>& gi) {
                          if (gi[0]) gemm_nt(true, g.data(), w.data(), gi[0]->data(), M, K, N);
                          if (gi[1]) gemm_tn(true, x.data(), g.data(), gi[1]->data(), K, N, M);
                          if (gi[2])
                              for (int m = 0; m < M; ++m)
                                  for (int n = 0; n < N; ++n) (*gi[2])[n] += g[m * N + n];
                      });
    return out;
}

template <typename T>
TensorT<T> dense(const TensorT<T>& x, const TensorT<T>& w) {
    return dense(x, w, TensorT<T>());
}

namespace detail {

// rows of col are row_stride apart, so a batch-wide col matrix can be
// consumed per sample without gathering
template <typename T>
void col2im_add(const T* col, int64_t row_stride, int C, int H, int W, int kh, int kw, int stride,
                int pad, int OH, int OW, T* x) {
    for (int c = 0; c < C; ++c) {
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                const T* src = col + ((c * kh + ky) * kw + kx) * row_stride;
                for (int oy = 0; oy < OH; ++oy) {
                    int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= H) continue;
                    T* dst = x + (c * H + iy) * static_cast<int64_t>(W);
                    for (int ox = 0; ox < OW; ++ox) {
                        int ix = ox * stride + kx - pad;
                        if (ix >= 0 && ix < W) dst[ix] += src[oy * OW + ox];
                    }
                }
            }
        }
    }
}

}  // namespace detail

namespace detail {

// batch-wide im2col: col[C*kh*kw, N*OH*OW], sample n occupying columns
// [n*OH*OW, (n+1)*OH*OW)
template <typename T>
void im2col_batch(const T* x, int N, int C, int H, int W, int kh, int kw, int stride, int pad,
                  int OH, int OW, T* col) {
    int64_t xstep = static_cast<int64_t>(C) * H * W;
    int64_t ohw = static_cast<int64_t>(OH) * OW;
    int64_t bhw = static_cast<int64_t>(N) * ohw;
    parallel_for(N, 1, [&](int64_t lo, int64_t hi) {
        for (int64_t n = lo; n < hi; ++n) {
            const T* xn = x + n * xstep;
            for (int c = 0; c < C; ++c)
                for (int ky = 0; ky < kh; ++ky)
                    for (int kx = 0; kx < kw; ++kx) {
                        T* dst = col + ((c * kh + ky) * kw + kx) * bhw + n * ohw;
                        for (int oy = 0; oy < OH; ++oy) {
                            int iy = oy * stride + ky - pad;
                            if (iy < 0 || iy >= H) {
                                std::fill(dst + oy * OW, dst + (oy + 1) * OW, T(0));
                                continue;
                            }
                            const T* src = xn + (c * H + iy) * static_cast<int64_t>(W);
                            T* drow = dst + oy * OW;
                            if (stride == 1) {
                                int lead = std::max(0, pad - kx);
                                int last = std::min(OW, W + pad - kx);
                                std::fill(drow, drow + lead, T(0));
                                if (last > lead)
                                    std::copy(src + lead + kx - pad, src + last + kx - pad,
                                              drow + lead);
                                std::fill(drow + std::max(lead, last), drow + OW, T(0));
                            } else {
                                for (int ox = 0; ox < OW; ++ox) {
                                    int ix = ox * stride + kx - pad;
                                    drow[ox] = (ix < 0 || ix >= W) ? T(0) : src[ix];
                                }
                            }
                        }
                    }
        }
    });
}

// [O, N*OH*OW] <-> [N, O, OH*OW] permutes
template <typename T>
void permute_to_nchw(const T* src, T* dst, int N, int O, int64_t ohw, const T* bias) {
    parallel_for(static_cast<int64_t>(N) * O, 4, [&](int64_t lo, int64_t hi) {
        for (int64_t p = lo; p < hi; ++p) {
            int64_t n = p / O, o = p % O;
            const T* s = src + o * N * ohw + n * ohw;
            T* d = dst + (n * O + o) * ohw;
            if (bias) {
                T bv = bias[o];
                for (int64_t i = 0; i < ohw; ++i) d[i] = s[i] + bv;
            } else {
                std::copy(s, s + ohw, d);
            }
        }
    });
}

template <typename T>
void permute_from_nchw(const T* src, T* dst, int N, int O, int64_t ohw) {
    parallel_for(static_cast<int64_t>(N) * O, 4, [&](int64_t lo, int64_t hi) {
        for (int64_t p = lo; p < hi; ++p) {
            int64_t n = p / O, o = p % O;
            std::copy(src + (n * O + o) * ohw, src + (n * O + o + 1) * ohw,
                      dst + o * N * ohw + n * ohw);
        }
    });
}

}  // namespace detail

// cross-correlation with stride/zero-padding: x[N,C,H,W] * k[O,C,kh,kw] (+ b[O])
template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& k, const TensorT<T>& b, int stride,
                  int pad) {
    check(x.rank() == 4 && k.rank() == 4, "conv2d: expects NCHW input and OCHW kernel");
    check(x.dim(1) == k.dim(1), "conv2d: channel mismatch " + x.shape_str() + " vs " + k.shape_str());
    check(stride >= 1, "conv2d: stride must be >= 1");
    check(pad >= 0, "conv2d: padding must be >= 0");
    int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    int O = k.dim(0), kh = k.dim(2), kw = k.dim(3);
    check(kh <= H + 2 * pad && kw <= W + 2 * pad, "conv2d: kernel larger than padded input");
    int OH = (H + 2 * pad - kh) / stride + 1;
    int OW = (W + 2 * pad - kw) / stride + 1;
    bool has_bias = b.defined();
    if (has_bias) check(b.rank() == 1 && b.dim(0) == O, "conv2d: bias shape mismatch");

    TensorT<T> out({N, O, OH, OW});
    int ckk = C * kh * kw;
    int64_t ohw = static_cast<int64_t>(OH) * OW;
    int64_t bhw = static_cast<int64_t>(N) * ohw;
    int64_t xstep = static_cast<int64_t>(C) * H * W;
    bool pointwise = kh == 1 && kw == 1 && stride == 1 && pad == 0;

    auto build_col = [=](const T* src, T* col) {
        if (pointwise)
            detail::permute_from_nchw(src, col, N, C, ohw);
        else
            detail::im2col_batch(src, N, C, H, W, kh, kw, stride, pad, OH, OW, col);
    };

    {
        T* col = scratch_buffer<T>(0, static_cast<int64_t>(ckk) * bhw);
        T* tmp = scratch_buffer<T>(1, static_cast<int64_t>(O) * bhw);
        build_col(x.data(), col);
        gemm_nn(false, k.data(), col, tmp, O, static_cast<int>(bhw), ckk);
        detail::permute_to_nchw(tmp, out.data(), N, O, ohw, has_bias ? b.data() : nullptr);
    }

    detail::record<T>(
        out, {&x, &k, &b},
        [x, k, build_col, N, C, H, W, O, kh, kw, stride, pad, OH, OW, ckk, ohw, bhw,
         xstep](const std::vector<T>& g, std::vector<std::vector<T>*>& gi) {
            T* gperm = scratch_buffer<T>(2, static_cast<int64_t>(O) * bhw);
            detail::permute_from_nchw(g.data(), gperm, N, O, ohw);
            if (gi[0]) {
                T* dcol = scratch_buffer<T>(3, static_cast<int64_t>(ckk) * bhw);
                gemm_tn(false, k.data(), gperm, dcol, ckk, static_cast<int>(bhw), O);
                parallel_for(N, 1, [&](int64_t lo, int64_t hi) {
                    for (int64_t n = lo; n < hi; ++n)
                        detail::col2im_add(dcol + n * ohw, bhw, C, H, W, kh, kw, stride, pad, OH,
                                           OW, gi[0]->data() + n * xstep);
                });
            }
            if (gi[1]) {
                T* col = scratch_buffer<T>(0, static_cast<int64_t>(ckk) * bhw);
                build_col(x.data(), col);
                gemm_nt_ksplit(true, gperm, col, gi[1]->data(), O, ckk, bhw);
            }
            if (gi[2]) {
                for (int o = 0; o < O; ++o) {
                    const T* row = gperm + o * bhw;
                    double s = 0;
                    for (int64_t i = 0; i < bhw; ++i) s += static_cast<double>(row[i]);
                    (*gi[2])[o] += static_cast<T>(s);
                }
            }
        });
    return out;
}

template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& k, int stride, int pad) {
    return conv2d(x, k, TensorT<T>(), stride, pad);
}

// group-wise normalization over [N,C,H,W] with per-channel affine
template <typename T>
TensorT<T> group_norm(const TensorT<T>& x, int groups, const TensorT<T>& gamma,
                      const TensorT<T>& beta, T eps = static_cast<T>(1e-5)) {
    check(x.rank() == 4, "group_norm: expects NCHW");
    int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    check(groups >= 1 && C % groups == 0, "group_norm: groups must divide channels");
    check(gamma.rank() == 1 && gamma.dim(0) == C && beta.rank() == 1 && beta.dim(0) == C,
          "group_norm: affine shape mismatch");
    int cs = C / groups;
    int64_t hw = static_cast<int64_t>(H) * W;
    int64_t gsize = cs * hw;

    TensorT<T> yhat(x.shape());  // normalized, pre-affine; cached for backward
    std::vector<T> inv_std(static_cast<size_t>(N) * groups);
    const T* px = x.data();
    T* py = yhat.data();
    parallel_for(static_cast<int64_t>(N) * groups, 1, [&](int64_t lo, int64_t hi) {
        for (int64_t ng = lo; ng < hi; ++ng) {
            int64_t base = (ng / groups) * C * hw + (ng % groups) * gsize;
            double m = 0;
            for (int64_t i = 0; i < gsize; ++i) m += static_cast<double>(px[base + i]);
            m /= static_cast<double>(gsize);
            double v = 0;
            for (int64_t i = 0; i < gsize; ++i) {
                double d = static_cast<double>(px[base + i]) - m;
                v += d * d;
            }
            v /= static_cast<double>(gsize);
            double is = 1.0 / std::sqrt(v + static_cast<double>(eps));
            inv_std[ng] = static_cast<T>(is);
            for (int64_t i = 0; i < gsize; ++i)
                py[base + i] = static_cast<T>((static_cast<double>(px[base + i]) - m) * is);
        }
    });

    TensorT<T> out(x.shape());
    T* po = out.data();
    const T *pg = gamma.data(), *pb = beta.data();
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            int64_t base = (static_cast<int64_t>(n) * C + c) * hw;
            for (int64_t i = 0; i < hw; ++i) po[base + i] = pg[c] * py[base + i] + pb[c];
        }

    detail::record<T>(
        out, {&x, &gamma, &beta},
        [yhat, gamma, inv_std, N, C, groups, cs, hw, gsize](const std::vector<T>& g,
                                                            std::vector<std::vector<T>*>& gi) {
            const T* py2 = yhat.data();
            const T* pg2 = gamma.data();
            if (gi[0]) {
                parallel_for(static_cast<int64_t>(N) * groups, 1, [&](int64_t lo, int64_t hi) {
                    std::vector<T> dy(gsize);
                    for (int64_t ng = lo; ng < hi; ++ng) {
                        int n = static_cast<int>(ng / groups);
                        int g0 = static_cast<int>(ng % groups);
                        int64_t base = (static_cast<int64_t>(n) * C + g0 * cs) * hw;
                        double sum_dy = 0, sum_dyy = 0;
                        for (int c = 0; c < cs; ++c) {
                            T gc = pg2[g0 * cs + c];
                            for (int64_t i = 0; i < hw; ++i) {
                                int64_t idx = c * hw + i;
                                T v = g[base + idx] * gc;
                                dy[idx] = v;
                                sum_dy += static_cast<double>(v);
                                sum_dyy += static_cast<double>(v) *
                                           static_cast<double>(py2[base + idx]);
                            }
                        }
                        double m_dy = sum_dy / static_cast<double>(gsize);
                        double m_dyy = sum_dyy / static_cast<double>(gsize);
                        double is = static_cast<double>(inv_std[ng]);
                        for (int64_t i = 0; i < gsize; ++i)
                            (*gi[0])[base + i] += static_cast<T>(
                                is * (static_cast<double>(dy[i]) - m_dy -
                                      static_cast<double>(py2[base + i]) * m_dyy));
                    }
                });
            }
            if (gi[1] || gi[2]) {
                for (int n = 0; n < N; ++n)
                    for (int c = 0; c < C; ++c) {
                        int64_t base = (static_cast<int64_t>(n) * C + c) * hw;
                        double sg = 0, sb = 0;
                        for (int64_t i = 0; i < hw; ++i) {
                            sg += static_cast<double>(g[base + i]) *
                                  static_cast<double>(py2[base + i]);
                            sb += static_cast<double>(g[base + i]);
                        }
                        if (gi[1]) (*gi[1])[c] += static_cast<T>(sg);
                        if (gi[2]) (*gi[2])[c] += static_cast<T>(sb);
                    }
            }
        });
    return out;
}

template <typename T>
TensorT<T> upsample_nearest2(const TensorT<T>& x) {
    check(x.rank() == 4, "upsample: expects NCHW");
    int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    TensorT<T> out({N, C, 2 * H, 2 * W});
    const T* px = x.data();
    T* po = out.data();
    int64_t planes = static_cast<int64_t>(N) * C;
    for (int64_t p = 0; p < planes; ++p) {
        const T* src = px + p * H * W;
        T* dst = po + p * 4 * H * W;
        for (int y = 0; y < 2 * H; ++y)
            for (int x2 = 0; x2 < 2 * W; ++x2) dst[y * 2 * W + x2] = src[(y / 2) * W + x2 / 2];
    }
    detail::record<T>(out, {&x},
                      [N, C, H, W](const std::vector<T>& g, std::vector<std::vector<T>*>& gi) {
                          if (!gi[0]) return;
                          int64_t planes = static_cast<int64_t>(N) * C;
                          for (int64_t p = 0; p < planes; ++p) {
                              const T* gs = g.data() + p * 4 * H * W;
                              T* gd = gi[0]->data() + p * H * W;
                              for (int y = 0; y < 2 * H; ++y)
                                  for (int x2 = 0; x2 < 2 * W; ++x2)
                                      gd[(y / 2) * W + x2 / 2] += gs[y * 2 * W + x2];
                          }
                      });
    return out;
}

template <typename T>
TensorT<T> downsample_nearest2(const TensorT<T>& x) {
    check(x.rank() == 4, "downsample: expects NCHW");
    int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    check(H % 2 == 0 && W % 2 == 0, "downsample: odd spatial dims");
    TensorT<T> out({N, C, H / 2, W / 2});
    const T* px = x.data();
    T* po = out.data();
    int64_t planes = static_cast<int64_t>(N) * C;
    for (int64_t p = 0; p < planes; ++p) {
        const T* src = px + p * H * W;
        T* dst = po + p * (H / 2) * (W / 2);
        for (int y = 0; y < H / 2; ++y)
            for (int x2 = 0; x2 < W / 2; ++x2) dst[y * (W / 2) + x2] = src[2 * y * W + 2 * x2];
    }
    detail::record<T>(out, {&x},
                      [N, C, H, W](const std::vector<T>& g, std::vector<std::vector<T>*>& gi) {
                          if (!gi[0]) return;
                          int64_t planes = static_cast<int64_t>(N) * C;
                          for (int64_t p = 0; p < planes; ++p) {
                              const T* gs = g.data() + p * (H / 2) * (W / 2);
                              T* gd = gi[0]->data() + p * H * W;
                              for (int y = 0; y < H / 2; ++y)
                                  for (int x2 = 0; x2 < W / 2; ++x2)
                                      gd[2 * y * W + 2 * x2] += gs[y * (W / 2) + x2];
                          }
                      });
    return out;
}

// x[N,C,H,W] + v[N,C] broadcast over the spatial dims
template <typename T>
TensorT<T> add_channel_bias(const TensorT<T>& x, const TensorT<T>& v) {
    check(x.rank() == 4 && v.rank() == 2, "add_channel_bias: expects NCHW + NC");
    check(x.dim(0) == v.dim(0) && x.dim(1) == v.dim(1), "add_channel_bias: shape mismatch");
    int N = x.dim(0), C = x.dim(1);
    int64_t hw = static_cast<int64_t>(x.dim(2)) * x.dim(3);
    TensorT<T> out(x.shape());
    const T *px = x.data(), *pv = v.data();
    T* po = out.data();
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            int64_t base = (static_cast<int64_t>(n) * C + c) * hw;
            T b = pv[n * C + c];
            for (int64_t i = 0; i < hw; ++i) po[base + i] = px[base + i] + b;
        }
    detail::record<T>(out, {&x, &v},
                      [N, C, hw](const std::vector<T>& g, std::vector<std::vector<T>*>& gi) {
                          if (gi[0])
                              for (size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
                          if (gi[1])
                              for (int n = 0; n < N; ++n)
                                  for (int c = 0; c < C; ++c) {
                                      int64_t base = (static_cast<int64_t>(n) * C + c) * hw;
                                      double s = 0;
                                      for (int64_t i = 0; i < hw; ++i)
                                          s += static_cast<double>(g[base + i]);
                                      (*gi[1])[n * C + c] += static_cast<T>(s);
                                  }
                      });
    return out;
}

// channel-wise max over the point axis: x[N,P,C] -> [N,C]; ties pick the
// lowest point index
template <typename T>
TensorT<T> reduce_max_points(const TensorT<T>& x) {
    check(x.rank() == 3, "reduce_max_points: expects [N,P,C]");
    int N = x.dim(0), P = x.dim(1), C = x.dim(2);
    check(P >= 1, "reduce_max_points: empty point axis");
    TensorT<T> out({N, C});
    std::vector<int> argmax(static_cast<size_t>(N) * C);
    const T* px = x.data();
    T* po = out.data();
    for (int n = 0; n < N; ++n) {
        const T* xn = px + static_cast<int64_t>(n) * P * C;
        for (int c = 0; c < C; ++c) {
            T best = xn[c];
            int bi = 0;
            for (int p = 1; p < P; ++p) {
                T v = xn[p * C + c];
                if (v > best) {
                    best = v;
                    bi = p;
                }
            }
            po[n * C + c] = best;
            argmax[n * C + c] = bi;
        }
    }
    detail::record<T>(out, {&x},
                      [argmax, N, P, C](const std::vector<T>& g, std::vector<std::vector<T>*>& gi) {
                          if (!gi[0]) return;
                          for (int n = 0; n < N; ++n)
                              for (int c = 0; c < C; ++c)
                                  (*gi[0])[(static_cast<int64_t>(n) * P + argmax[n * C + c]) * C +
                                           c] += g[n * C + c];
                      });
    return out;
}

// mean binary cross-entropy on logits; targets are plain data (no gradient)
template <typename T>
TensorT<T> bce_with_logits_mean(const TensorT<T>& logits, const TensorT<T>& targets) {
    detail::same_shape(logits, targets, "bce");
    int64_t n = logits.size();
    const T *pz = logits.data(), *py = targets.data();
    double acc = 0;
    for (int64_t i = 0; i < n; ++i) {
        double z = static_cast<double>(pz[i]);
        double y = static_cast<double>(py[i]);
        acc += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    }
    TensorT<T> out = TensorT<T>::scalar(static_cast<T>(acc / static_cast<double>(n)));
    detail::record<T>(out, {&logits},
                      [logits, targets, n](const std::vector<T>& g,
                                           std::vector<std::vector<T>*>& gi) {
                          if (!gi[0]) return;
                          const T *pz2 = logits.data(), *py2 = targets.data();
                          double inv = 1.0 / static_cast<double>(n);
                          for (int64_t i = 0; i < n; ++i)
                              (*gi[0])[i] += g[0] * static_cast<T>(
                                  (detail::sigmoid_d(static_cast<double>(pz2[i])) -
                                   static_cast<double>(py2[i])) * inv);
                      });
    return out;
}

// non-differentiable utilities

template <typename T>
TensorT<T> clamp(const TensorT<T>& a, T lo, T hi) {
    TensorT<T> out(a.shape());
    const T* pa = a.data();
    T* po = out.data();
    for (int64_t i = 0; i < a.size(); ++i) po[i] = std::min(hi, std::max(lo, pa[i]));
    return out;
}

}  // namespace ss2r::ops
