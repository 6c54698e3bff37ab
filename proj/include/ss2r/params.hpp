#pragma once

#include <map>
#include <string>

#include "ss2r/tensor.hpp"

namespace ss2r {

// Named parameter set. Ordered map so that iteration (updates, checkpoints)
// is deterministic.
template <typename T>
class ParamStore {
public:
    TensorT<T>& add(const std::string& name, TensorT<T> t) {
        check(params_.find(name) == params_.end(), "params: duplicate name " + name);
        t.set_requires_grad(true);
        auto [it, ok] = params_.emplace(name, std::move(t));
        (void)ok;
        return it->second;
    }

    TensorT<T>& at(const std::string& name) {
        auto it = params_.find(name);
        check(it != params_.end(), "params: missing " + name);
        return it->second;
    }

    const TensorT<T>& at(const std::string& name) const {
        auto it = params_.find(name);
        check(it != params_.end(), "params: missing " + name);
        return it->second;
    }

    bool has(const std::string& name) const { return params_.count(name) != 0; }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }
    size_t size() const { return params_.size(); }

    int64_t element_count() const {
        int64_t n = 0;
        for (const auto& [k, v] : params_) n += v.size();
        return n;
    }

    bool all_finite() const {
        for (const auto& [k, v] : params_)
            if (!v.all_finite()) return false;
        return true;
    }

    template <typename U>
    ParamStore<U> cast() const {
        ParamStore<U> out;
        for (const auto& [k, v] : params_) {
            std::vector<U> data(v.size());
            for (int64_t i = 0; i < v.size(); ++i) data[i] = static_cast<U>(v.data()[i]);
            out.add(k, TensorT<U>::from_data(v.shape(), std::move(data)));
        }
        return out;
    }

private:
    std::map<std::string, TensorT<T>> params_;
};

}  // namespace ss2r
