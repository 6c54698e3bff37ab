#pragma once

#include <cmath>

#include "ss2r/params.hpp"

namespace ss2r {

// AdamW with decoupled weight decay and bias correction. A step with any
// non-finite gradient is rejected before touching parameters or state.
template <typename T>
class AdamW {
public:
    struct Config {
        T lr = static_cast<T>(3e-5);
        T beta1 = static_cast<T>(0.9);
        T beta2 = static_cast<T>(0.999);
        T eps = static_cast<T>(1e-8);
        T weight_decay = static_cast<T>(0);
    };

    AdamW() = default;
    explicit AdamW(Config cfg) : cfg_(cfg) {}

    const Config& config() const { return cfg_; }
    Config& config() { return cfg_; }
    int64_t step_count() const { return step_; }

    void step(ParamStore<T>& params, const GradMap<T>& grads) {
        std::vector<TensorT<T>> gs;
        gs.reserve(params.size());
        for (auto& [name, p] : params) {
            TensorT<T> g = grads.grad(p);
            if (!g.all_finite())
                throw std::runtime_error("adamw: non-finite gradient for " + name +
                                         "; step rejected");
            gs.push_back(std::move(g));
        }
        ++step_;
        double bc1 = 1.0 - std::pow(static_cast<double>(cfg_.beta1), static_cast<double>(step_));
        double bc2 = 1.0 - std::pow(static_cast<double>(cfg_.beta2), static_cast<double>(step_));
        size_t pi = 0;
        for (auto& [name, p] : params) {
            const TensorT<T>& g = gs[pi++];
            auto& m = moment1_[name];
            auto& v = moment2_[name];
            if (m.empty()) {
                m.assign(p.size(), T(0));
                v.assign(p.size(), T(0));
            }
            check(static_cast<int64_t>(m.size()) == p.size(),
                  "adamw: state shape mismatch for " + name);
            T* pp = p.data();
            const T* pg = g.data();
            for (int64_t i = 0; i < p.size(); ++i) {
                m[i] = cfg_.beta1 * m[i] + (T(1) - cfg_.beta1) * pg[i];
                v[i] = cfg_.beta2 * v[i] + (T(1) - cfg_.beta2) * pg[i] * pg[i];
                double mhat = static_cast<double>(m[i]) / bc1;
                double vhat = static_cast<double>(v[i]) / bc2;
                double update = mhat / (std::sqrt(vhat) + static_cast<double>(cfg_.eps));
                pp[i] -= static_cast<T>(static_cast<double>(cfg_.lr) *
                                        (update + static_cast<double>(cfg_.weight_decay) *
                                                      static_cast<double>(pp[i])));
            }
        }
    }

    // expose state as named tensors for checkpointing
    ParamStore<T> export_state() const {
        ParamStore<T> s;
        s.add("opt.step", TensorT<T>::scalar(static_cast<T>(step_)));
        for (const auto& [name, m] : moment1_)
            s.add("opt.m." + name,
                  TensorT<T>::from_data({static_cast<int>(m.size())}, std::vector<T>(m)));
        for (const auto& [name, v] : moment2_)
            s.add("opt.v." + name,
                  TensorT<T>::from_data({static_cast<int>(v.size())}, std::vector<T>(v)));
        return s;
    }

    void import_state(const ParamStore<T>& s) {
        moment1_.clear();
        moment2_.clear();
        step_ = static_cast<int64_t>(s.at("opt.step").item());
        for (const auto& [name, t] : s) {
            if (name.rfind("opt.m.", 0) == 0)
                moment1_[name.substr(6)] = t.vec();
            else if (name.rfind("opt.v.", 0) == 0)
                moment2_[name.substr(6)] = t.vec();
        }
    }

private:
    Config cfg_;
    int64_t step_ = 0;
    std::map<std::string, std::vector<T>> moment1_, moment2_;
};

}  // namespace ss2r
