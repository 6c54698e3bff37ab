#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ss2r/ops.hpp"

namespace ss2r {

struct GradCheckEntry {
    std::string name;
    double max_rel_err;
};

// Central finite differences against tape gradients, in 64-bit mode. The
// oracle side only ever calls loss_fn forward, so it stays independent of the
// analytic adjoints it is checking.
inline double fd_max_rel_err(std::vector<TensorT<double>*> inputs,
                             const std::function<TensorT<double>()>& loss_fn,
                             double step = 1e-3) {
    GradTape<double> tape;
    std::vector<TensorT<double>> analytic;
    {
        TapeScope<double> scope(tape);
        for (auto* t : inputs) t->set_requires_grad(true);
        TensorT<double> loss = loss_fn();
        GradMap<double> grads = tape.backward(loss);
        for (auto* t : inputs) analytic.push_back(grads.grad(*t));
    }
    double worst = 0;
    for (size_t k = 0; k < inputs.size(); ++k) {
        TensorT<double>& t = *inputs[k];
        for (int64_t i = 0; i < t.size(); ++i) {
            double orig = t.data()[i];
            t.data()[i] = orig + step;
            double up = loss_fn().item();
            t.data()[i] = orig - step;
            double dn = loss_fn().item();
            t.data()[i] = orig;
            double fd = (up - dn) / (2 * step);
            double an = analytic[k].data()[i];
            double denom = std::max({std::abs(fd), std::abs(an), 1e-2});
            worst = std::max(worst, std::abs(fd - an) / denom);
        }
    }
    return worst;
}

// Gradient checks for every differentiable op plus the denoiser and point
// classifier at reduced configurations.
std::vector<GradCheckEntry> run_gradcheck_suite(uint64_t seed);

}  // namespace ss2r
