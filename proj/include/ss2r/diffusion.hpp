#pragma once

#include <vector>

#include "ss2r/ops.hpp"

namespace ss2r {

enum class ScheduleKind { linear };

// Per-step noising tables. alpha_bar[t] is the cumulative product of alpha up
// to and including t; index -1 conventionally denotes the clean level
// (alpha_bar = 1), see alpha_bar_at.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;
    std::vector<double> sigma;

    double alpha_bar_at(int t) const {
        if (t < 0) return 1.0;
        check(t < T, "schedule: step out of range");
        return alpha_bar[t];
    }
};

NoiseSchedule make_schedule(int T, double beta_start, double beta_end,
                            ScheduleKind kind = ScheduleKind::linear);

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps; the caller supplies eps
template <typename T>
TensorT<T> forward_diffuse(const TensorT<T>& x0, int t, const TensorT<T>& eps,
                           const NoiseSchedule& s) {
    check(t >= 0 && t < s.T, "forward_diffuse: t out of range");
    check(x0.shape() == eps.shape(), "forward_diffuse: x0/eps shape mismatch");
    T a = static_cast<T>(std::sqrt(s.alpha_bar[t]));
    T b = static_cast<T>(std::sqrt(1.0 - s.alpha_bar[t]));
    return ops::add(ops::scale(x0, a), ops::scale(eps, b));
}

// per-sample step indices
template <typename T>
TensorT<T> forward_diffuse_batch(const TensorT<T>& x0, const std::vector<int>& t,
                                 const TensorT<T>& eps, const NoiseSchedule& s) {
    check(x0.shape() == eps.shape(), "forward_diffuse: x0/eps shape mismatch");
    check(x0.rank() >= 1 && x0.dim(0) == static_cast<int>(t.size()),
          "forward_diffuse: batch size mismatch");
    TensorT<T> out(x0.shape());
    int64_t stride = x0.size() / x0.dim(0);
    for (size_t n = 0; n < t.size(); ++n) {
        check(t[n] >= 0 && t[n] < s.T, "forward_diffuse: t out of range");
        T a = static_cast<T>(std::sqrt(s.alpha_bar[t[n]]));
        T b = static_cast<T>(std::sqrt(1.0 - s.alpha_bar[t[n]]));
        const T* px = x0.data() + n * stride;
        const T* pe = eps.data() + n * stride;
        T* po = out.data() + n * stride;
        for (int64_t i = 0; i < stride; ++i) po[i] = a * px[i] + b * pe[i];
    }
    return out;
}

// ancestral step: mean term per the backward process, plus sigma_t * noise.
// The caller must pass zero noise at t = 0 (the final, deterministic step).
template <typename T>
TensorT<T> ddpm_step(const TensorT<T>& x_t, int t, const TensorT<T>& eps_pred,
                     const NoiseSchedule& s, const TensorT<T>& noise) {
    check(t >= 0 && t < s.T, "ddpm_step: t out of range");
    check(x_t.shape() == eps_pred.shape() && x_t.shape() == noise.shape(),
          "ddpm_step: shape mismatch");
    double at = s.alpha[t];
    double abar = s.alpha_bar[t];
    T c1 = static_cast<T>(1.0 / std::sqrt(at));
    T c2 = static_cast<T>((1.0 - at) / std::sqrt(at * (1.0 - abar)));
    T sg = static_cast<T>(s.sigma[t]);
    TensorT<T> out(x_t.shape());
    const T *px = x_t.data(), *pe = eps_pred.data(), *pn = noise.data();
    T* po = out.data();
    for (int64_t i = 0; i < out.size(); ++i) po[i] = c1 * px[i] - c2 * pe[i] + sg * pn[i];
    return out;
}

// DDIM transition t -> t_prev (t_prev = -1 lands on the clean level);
// eta = 0 is fully deterministic.
template <typename T>
TensorT<T> ddim_step(const TensorT<T>& x_t, int t, int t_prev, const TensorT<T>& eps_pred,
                     const NoiseSchedule& s, double eta, const TensorT<T>& noise) {
    check(t >= 0 && t < s.T, "ddim_step: t out of range");
    check(t_prev < t, "ddim_step: t_prev must be below t");
    check(eta >= 0.0 && eta <= 1.0, "ddim_step: eta must lie in [0,1]");
    check(x_t.shape() == eps_pred.shape(), "ddim_step: shape mismatch");
    double abar_t = s.alpha_bar[t];
    double abar_p = s.alpha_bar_at(t_prev);
    double sigma = 0.0;
    if (eta > 0.0)
        sigma = eta * std::sqrt((1.0 - abar_p) / (1.0 - abar_t)) *
                std::sqrt(1.0 - abar_t / abar_p);
    double dir = std::sqrt(std::max(0.0, 1.0 - abar_p - sigma * sigma));
    T c_x0 = static_cast<T>(std::sqrt(abar_p));
    T inv_sq = static_cast<T>(1.0 / std::sqrt(abar_t));
    T c_eps_in = static_cast<T>(std::sqrt(1.0 - abar_t));
    T c_dir = static_cast<T>(dir);
    T c_sig = static_cast<T>(sigma);
    if (sigma > 0.0) check(x_t.shape() == noise.shape(), "ddim_step: noise shape mismatch");
    TensorT<T> out(x_t.shape());
    const T *px = x_t.data(), *pe = eps_pred.data();
    const T* pn = sigma > 0.0 ? noise.data() : nullptr;
    T* po = out.data();
    for (int64_t i = 0; i < out.size(); ++i) {
        T x0_hat = (px[i] - c_eps_in * pe[i]) * inv_sq;
        po[i] = c_x0 * x0_hat + c_dir * pe[i] + (pn ? c_sig * pn[i] : T(0));
    }
    return out;
}

// predicted clean sample from (x_t, eps_pred)
template <typename T>
TensorT<T> predict_x0(const TensorT<T>& x_t, int t, const TensorT<T>& eps_pred,
                      const NoiseSchedule& s) {
    check(t >= 0 && t < s.T, "predict_x0: t out of range");
    double abar = s.alpha_bar[t];
    T inv_sq = static_cast<T>(1.0 / std::sqrt(abar));
    T c_eps = static_cast<T>(std::sqrt(1.0 - abar));
    TensorT<T> out(x_t.shape());
    const T *px = x_t.data(), *pe = eps_pred.data();
    T* po = out.data();
    for (int64_t i = 0; i < out.size(); ++i) po[i] = (px[i] - c_eps * pe[i]) * inv_sq;
    return out;
}

// descending step levels for an S-step sampling trajectory over [0, T)
std::vector<int> ddim_timesteps(int T, int steps);

// One training batch. weight_mask is only present for the second-stage loss;
// valid_mask marks pixels that participate in the loss at all.
template <typename T>
struct DiffusionBatch {
    TensorT<T> x0;                // target (normalized residual maps)
    TensorT<T> condition;         // stage-dependent conditioning maps
    std::vector<int> t;           // per-sample step index
    TensorT<T> eps;               // unit Gaussian draw, same shape as x0
    TensorT<T> valid_mask;        // 1 on pixels included in the loss
    TensorT<T> weight_mask;       // per-pixel omega/lambda weights (stage II)
};

// mean squared eps-prediction error over valid pixels
template <typename T, typename Denoiser>
TensorT<T> stage1_loss(const DiffusionBatch<T>& batch, Denoiser&& denoiser,
                       const NoiseSchedule& s) {
    check(batch.x0.shape() == batch.eps.shape(), "stage1_loss: x0/eps shape mismatch");
    check(batch.x0.shape() == batch.valid_mask.shape(), "stage1_loss: mask shape mismatch");
    TensorT<T> x_t = forward_diffuse_batch(batch.x0, batch.t, batch.eps, s);
    TensorT<T> eps_pred = denoiser(x_t, batch.t, batch.condition);
    check(eps_pred.shape() == batch.eps.shape(), "stage1_loss: prediction shape mismatch");
    TensorT<T> diff = ops::sub(eps_pred, batch.eps);
    TensorT<T> sq = ops::mul(diff, diff);
    TensorT<T> masked = ops::mul(sq, batch.valid_mask);
    double denom = 0;
    for (int64_t i = 0; i < batch.valid_mask.size(); ++i)
        denom += static_cast<double>(batch.valid_mask.data()[i]);
    check(denom > 0, "stage1_loss: empty valid mask");
    return ops::scale(ops::sum(masked), static_cast<T>(1.0 / denom));
}

// per-pixel squared error weighted by the omega/lambda mask, averaged over
// valid pixels
template <typename T, typename Denoiser>
TensorT<T> stage2_loss(const DiffusionBatch<T>& batch, Denoiser&& denoiser,
                       const NoiseSchedule& s, double omega, double lambda) {
    check(batch.weight_mask.defined(), "stage2_loss: weight mask required");
    check(lambda > omega, "stage2_loss: lambda must exceed omega");
    check(batch.weight_mask.shape() == batch.x0.shape(), "stage2_loss: weight mask shape mismatch");
    TensorT<T> x_t = forward_diffuse_batch(batch.x0, batch.t, batch.eps, s);
    TensorT<T> eps_pred = denoiser(x_t, batch.t, batch.condition);
    check(eps_pred.shape() == batch.eps.shape(), "stage2_loss: prediction shape mismatch");
    TensorT<T> diff = ops::sub(eps_pred, batch.eps);
    TensorT<T> sq = ops::mul(diff, diff);
    TensorT<T> weighted = ops::mul(sq, batch.weight_mask);
    TensorT<T> masked = ops::mul(weighted, batch.valid_mask);
    double denom = 0;
    for (int64_t i = 0; i < batch.valid_mask.size(); ++i)
        denom += static_cast<double>(batch.valid_mask.data()[i]);
    check(denom > 0, "stage2_loss: empty valid mask");
    return ops::scale(ops::sum(masked), static_cast<T>(1.0 / denom));
}

}  // namespace ss2r
