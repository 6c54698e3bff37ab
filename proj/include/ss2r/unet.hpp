#pragma once

#include <numeric>
#include <string>
#include <vector>

#include "ss2r/ops.hpp"
#include "ss2r/params.hpp"

namespace ss2r {

struct DenoiserConfig {
    int resolution = 64;
    int base_width = 32;
    int levels = 3;
    int blocks_per_level = 2;
    int time_dim = 64;
    int cond_channels = 1;  // 1: synthetic depth; 2: synthetic + first-stage residual

    void validate() const {
        check(levels >= 1 && blocks_per_level >= 1, "denoiser: bad topology");
        check(cond_channels == 1 || cond_channels == 2, "denoiser: cond channels must be 1 or 2");
        check(resolution % (1 << (levels - 1)) == 0,
              "denoiser: resolution must be divisible by 2^(levels-1)");
        check(time_dim >= 4 && time_dim % 2 == 0, "denoiser: time_dim must be even and >= 4");
    }

    int width(int level) const { return base_width << level; }
};

// interleaved [sin(t*w_i), cos(t*w_i)] pairs, w_i = 10000^(-2i/dim)
template <typename T>
TensorT<T> time_embedding(const std::vector<int>& t, int dim) {
    check(dim >= 2 && dim % 2 == 0, "time_embedding: dim must be even");
    TensorT<T> out({static_cast<int>(t.size()), dim});
    T* po = out.data();
    for (size_t n = 0; n < t.size(); ++n) {
        check(t[n] >= 0, "time_embedding: negative step");
        for (int i = 0; i < dim / 2; ++i) {
            double w = std::pow(10000.0, -2.0 * i / static_cast<double>(dim));
            double a = static_cast<double>(t[n]) * w;
            po[n * dim + 2 * i] = static_cast<T>(std::sin(a));
            po[n * dim + 2 * i + 1] = static_cast<T>(std::cos(a));
        }
    }
    return out;
}

namespace unet_detail {

inline int norm_groups(int channels) {
    int g = std::gcd(channels, 8);
    return g == 0 ? 1 : g;
}

template <typename T>
void add_conv(ParamStore<T>& p, const std::string& name, int out_c, int in_c, int k,
              const Rng& rng, uint64_t stream, double gain = 1.0) {
    T std_dev = static_cast<T>(gain * std::sqrt(2.0 / (in_c * k * k)));
    p.add(name + ".w", TensorT<T>::randn({out_c, in_c, k, k}, rng, stream, std_dev));
    p.add(name + ".b", TensorT<T>::zeros({out_c}));
}

template <typename T>
void add_dense(ParamStore<T>& p, const std::string& name, int in_c, int out_c, const Rng& rng,
               uint64_t stream, bool zero_init = false) {
    T std_dev = zero_init ? T(0) : static_cast<T>(std::sqrt(1.0 / in_c));
    p.add(name + ".w", TensorT<T>::randn({in_c, out_c}, rng, stream, std_dev));
    p.add(name + ".b", TensorT<T>::zeros({out_c}));
}

template <typename T>
void add_norm(ParamStore<T>& p, const std::string& name, int c) {
    p.add(name + ".g", TensorT<T>({c}, T(1)));
    p.add(name + ".b", TensorT<T>::zeros({c}));
}

template <typename T>
void add_res_block(ParamStore<T>& p, const std::string& prefix, int in_c, int out_c, int time_dim,
                   const Rng& rng, uint64_t& stream) {
    add_norm(p, prefix + ".gn1", in_c);
    add_conv(p, prefix + ".conv1", out_c, in_c, 3, rng, stream++);
    add_dense(p, prefix + ".temb", time_dim, out_c, rng, stream++);
    add_norm(p, prefix + ".gn2", out_c);
    add_conv(p, prefix + ".conv2", out_c, out_c, 3, rng, stream++);
    if (in_c != out_c) add_conv(p, prefix + ".skip", out_c, in_c, 1, rng, stream++);
}

template <typename T>
TensorT<T> res_block(const ParamStore<T>& p, const std::string& prefix, const TensorT<T>& h,
                     const TensorT<T>& temb) {
    int in_c = h.dim(1);
    const TensorT<T>& w1 = p.at(prefix + ".conv1.w");
    int out_c = w1.dim(0);
    TensorT<T> a = ops::silu(
        ops::group_norm(h, norm_groups(in_c), p.at(prefix + ".gn1.g"), p.at(prefix + ".gn1.b")));
    a = ops::conv2d(a, w1, p.at(prefix + ".conv1.b"), 1, 1);
    TensorT<T> tproj =
        ops::dense(ops::silu(temb), p.at(prefix + ".temb.w"), p.at(prefix + ".temb.b"));
    a = ops::add_channel_bias(a, tproj);
    a = ops::silu(
        ops::group_norm(a, norm_groups(out_c), p.at(prefix + ".gn2.g"), p.at(prefix + ".gn2.b")));
    a = ops::conv2d(a, p.at(prefix + ".conv2.w"), p.at(prefix + ".conv2.b"), 1, 1);
    TensorT<T> sk = in_c == out_c
                        ? h
                        : ops::conv2d(h, p.at(prefix + ".skip.w"), p.at(prefix + ".skip.b"), 1, 0);
    return ops::add(a, sk);
}

}  // namespace unet_detail

template <typename T>
ParamStore<T> init_denoiser(const DenoiserConfig& cfg, uint64_t seed) {
    cfg.validate();
    using namespace unet_detail;
    Rng rng(seed);
    uint64_t stream = 1;
    ParamStore<T> p;
    int L = cfg.levels, B = cfg.blocks_per_level;

    add_dense(p, "temb.fc1", cfg.time_dim, cfg.time_dim, rng, stream++);
    add_dense(p, "temb.fc2", cfg.time_dim, cfg.time_dim, rng, stream++);
    add_conv(p, "in", cfg.width(0), 1, 3, rng, stream++);

    for (int l = 0; l < L; ++l) {
        int w = cfg.width(l);
        for (int b = 0; b < B; ++b) {
            int in_c = b == 0 ? (l == 0 ? cfg.width(0) : cfg.width(l - 1)) : w;
            add_res_block(p, "enc.l" + std::to_string(l) + ".b" + std::to_string(b), in_c, w,
                          cfg.time_dim, rng, stream);
        }
    }
    int wm = cfg.width(L - 1);
    add_res_block(p, "mid.b0", wm, wm, cfg.time_dim, rng, stream);
    add_res_block(p, "mid.b1", wm, wm, cfg.time_dim, rng, stream);
    for (int l = L - 1; l >= 0; --l) {
        int w = cfg.width(l);
        int carried = l == L - 1 ? wm : cfg.width(l + 1);
        for (int b = 0; b < B; ++b) {
            int in_c = b == 0 ? carried + w : w;
            add_res_block(p, "dec.l" + std::to_string(l) + ".b" + std::to_string(b), in_c, w,
                          cfg.time_dim, rng, stream);
        }
    }
    add_norm(p, "out.gn", cfg.width(0));
    add_conv(p, "out", 1, cfg.width(0), 3, rng, stream++, /*gain=*/0.1);

    // condition branch; projection convs are zero so injection starts as a
    // strict no-op
    add_conv(p, "cond.in", cfg.width(0), cfg.cond_channels, 3, rng, stream++);
    for (int l = 0; l < L; ++l) {
        std::string pre = "cond.l" + std::to_string(l);
        add_conv(p, pre + ".c1", cfg.width(l), cfg.width(l), 3, rng, stream++);
        add_conv(p, pre + ".proj", cfg.width(l), cfg.width(l), 1, rng, stream++, /*gain=*/0.0);
        if (l < L - 1) add_conv(p, pre + ".widen", cfg.width(l + 1), cfg.width(l), 3, rng, stream++);
    }
    return p;
}

// one feature map per decoder resolution level, added into the corresponding
// decoder block inputs
template <typename T>
std::vector<TensorT<T>> encode_condition(const ParamStore<T>& p, const DenoiserConfig& cfg,
                                         const TensorT<T>& cond) {
    check(cond.rank() == 4 && cond.dim(1) == cfg.cond_channels,
          "encode_condition: condition channel mismatch, got " + cond.shape_str());
    TensorT<T> h = ops::silu(ops::conv2d(cond, p.at("cond.in.w"), p.at("cond.in.b"), 1, 1));
    std::vector<TensorT<T>> feats;
    for (int l = 0; l < cfg.levels; ++l) {
        std::string pre = "cond.l" + std::to_string(l);
        h = ops::silu(ops::conv2d(h, p.at(pre + ".c1.w"), p.at(pre + ".c1.b"), 1, 1));
        feats.push_back(ops::conv2d(h, p.at(pre + ".proj.w"), p.at(pre + ".proj.b"), 1, 0));
        if (l < cfg.levels - 1) {
            h = ops::downsample_nearest2(h);
            h = ops::silu(ops::conv2d(h, p.at(pre + ".widen.w"), p.at(pre + ".widen.b"), 1, 1));
        }
    }
    return feats;
}

template <typename T>
TensorT<T> denoiser_forward(const ParamStore<T>& p, const DenoiserConfig& cfg,
                            const TensorT<T>& x_t, const std::vector<int>& t,
                            const std::vector<TensorT<T>>& cond_feats) {
    using namespace unet_detail;
    check(x_t.rank() == 4 && x_t.dim(1) == 1, "denoiser: expects [N,1,H,W] input");
    check(static_cast<int>(t.size()) == x_t.dim(0), "denoiser: t batch mismatch");
    check(static_cast<int>(cond_feats.size()) == cfg.levels,
          "denoiser: need one condition feature per level");

    TensorT<T> temb0 = time_embedding<T>(t, cfg.time_dim);
    TensorT<T> temb = ops::dense(ops::silu(ops::dense(temb0, p.at("temb.fc1.w"),
                                                      p.at("temb.fc1.b"))),
                                 p.at("temb.fc2.w"), p.at("temb.fc2.b"));

    TensorT<T> h = ops::conv2d(x_t, p.at("in.w"), p.at("in.b"), 1, 1);
    std::vector<TensorT<T>> skips;
    for (int l = 0; l < cfg.levels; ++l) {
        for (int b = 0; b < cfg.blocks_per_level; ++b)
            h = res_block(p, "enc.l" + std::to_string(l) + ".b" + std::to_string(b), h, temb);
        skips.push_back(h);
        if (l < cfg.levels - 1) h = ops::downsample_nearest2(h);
    }
    h = res_block(p, "mid.b0", h, temb);
    h = res_block(p, "mid.b1", h, temb);
    for (int l = cfg.levels - 1; l >= 0; --l) {
        TensorT<T> skip_in = ops::add(skips[l], cond_feats[l]);
        h = ops::concat_channels(h, skip_in);
        for (int b = 0; b < cfg.blocks_per_level; ++b)
            h = res_block(p, "dec.l" + std::to_string(l) + ".b" + std::to_string(b), h, temb);
        if (l > 0) h = ops::upsample_nearest2(h);
    }
    h = ops::silu(ops::group_norm(h, norm_groups(cfg.width(0)), p.at("out.gn.g"),
                                  p.at("out.gn.b")));
    return ops::conv2d(h, p.at("out.w"), p.at("out.b"), 1, 1);
}

// full conditional noise prediction; non-finite activations surface as a
// training fault
template <typename T>
TensorT<T> predict_noise(const ParamStore<T>& p, const DenoiserConfig& cfg, const TensorT<T>& x_t,
                         const std::vector<int>& t, const TensorT<T>& cond) {
    if (!x_t.all_finite()) throw std::runtime_error("predict_noise: non-finite input");
    TensorT<T> out = denoiser_forward(p, cfg, x_t, t, encode_condition(p, cfg, cond));
    if (!out.all_finite()) throw std::runtime_error("predict_noise: non-finite activations");
    return out;
}

// Bundles weights + config into the callable shape the losses expect.
template <typename T>
struct Denoiser {
    const ParamStore<T>* params;
    DenoiserConfig cfg;

    TensorT<T> operator()(const TensorT<T>& x_t, const std::vector<int>& t,
                          const TensorT<T>& cond) const {
        return predict_noise(*params, cfg, x_t, t, cond);
    }
};

// Seed second-stage weights from trained first-stage weights: identical
// tensors everywhere, with the condition stem widened to two channels (the
// new channel starts at zero).
ParamStore<float> adapt_to_stage2(const ParamStore<float>& stage1, const DenoiserConfig& cfg1,
                                  const DenoiserConfig& cfg2);

}  // namespace ss2r
