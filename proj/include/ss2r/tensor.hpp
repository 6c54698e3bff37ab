#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ss2r/common.hpp"
#include "ss2r/rng.hpp"

namespace ss2r {

template <typename T>
class GradTape;

// Dense row-major tensor. Data is shared and treated as immutable once a
// tensor has been consumed by an op; parameter updates are single-writer.
template <typename T>
class TensorT {
public:
    TensorT() = default;

    explicit TensorT(std::vector<int> shape, T fill = T(0)) : shape_(std::move(shape)) {
        data_ = std::make_shared<std::vector<T>>(count(shape_), fill);
    }

    static TensorT zeros(std::vector<int> shape) { return TensorT(std::move(shape)); }

    static TensorT from_data(std::vector<int> shape, std::vector<T> data) {
        check(count(shape) == static_cast<int64_t>(data.size()),
              "tensor: data length does not match shape");
        TensorT t;
        t.shape_ = std::move(shape);
        t.data_ = std::make_shared<std::vector<T>>(std::move(data));
        return t;
    }

    static TensorT scalar(T v) { return from_data({1}, {v}); }

    static TensorT randn(std::vector<int> shape, const Rng& rng, uint64_t stream, T scale = T(1)) {
        TensorT t(std::move(shape));
        T* p = t.data();
        int64_t n = t.size();
        parallel_for(n, 4096, [&](int64_t lo, int64_t hi) {
            for (int64_t i = lo; i < hi; ++i) p[i] = static_cast<T>(rng.normal(stream, i)) * scale;
        });
        return t;
    }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_.at(i); }
    int rank() const { return static_cast<int>(shape_.size()); }
    int64_t size() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }
    bool defined() const { return static_cast<bool>(data_); }

    const T* data() const { return data_->data(); }
    T* data() { return data_->data(); }
    const std::vector<T>& vec() const { return *data_; }
    const void* id() const { return data_.get(); }

    T item() const {
        check(size() == 1, "tensor: item() requires a single-element tensor");
        return (*data_)[0];
    }

    bool requires_grad() const { return requires_grad_; }
    TensorT& set_requires_grad(bool v) {
        requires_grad_ = v;
        return *this;
    }

    bool all_finite() const {
        for (const T& v : *data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    // same data buffer, new shape
    TensorT<T> viewed(std::vector<int> shape) const {
        check(count(shape) == size(), "tensor: view must preserve element count");
        TensorT t = *this;
        t.shape_ = std::move(shape);
        return t;
    }

    static int64_t count(const std::vector<int>& shape) {
        int64_t n = 1;
        for (int d : shape) {
            check(d >= 0, "tensor: negative dimension");
            n *= d;
        }
        return n;
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << "[";
        for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
        os << "]";
        return os.str();
    }

    // tape node id assigned when produced or tracked; -1 means untracked.
    // gen identifies the owning tape so stale ids never leak across tapes.
    int node = -1;
    uint64_t gen = 0;

private:
    std::vector<int> shape_;
    std::shared_ptr<std::vector<T>> data_;
    bool requires_grad_ = false;
};

using Tensor = TensorT<float>;

template <typename T>
class GradMap {
public:
    TensorT<T> grad(const TensorT<T>& t) const {
        int id = node_of(t);
        if (id < 0 || id >= static_cast<int>(by_node_.size()) || by_node_[id].empty())
            return TensorT<T>::zeros(t.shape());
        return TensorT<T>::from_data(t.shape(), by_node_[id]);
    }

    bool nonzero(const TensorT<T>& t) const {
        int id = node_of(t);
        return id >= 0 && id < static_cast<int>(by_node_.size()) && !by_node_[id].empty();
    }

private:
    friend class GradTape<T>;
    int node_of(const TensorT<T>& t) const {
        if (t.node >= 0 && t.gen == gen_) return t.node;
        auto it = leaves_.find(t.id());
        return it == leaves_.end() ? -1 : it->second;
    }
    uint64_t gen_ = 0;
    std::vector<std::vector<T>> by_node_;
    std::unordered_map<const void*, int> leaves_;
};

// Ordered record of ops; replaying it backward visits each recorded op once,
// in reverse execution (= reverse topological) order.
template <typename T>
class GradTape {
public:
    using BackwardFn =
        std::function<void(const std::vector<T>& grad_out, std::vector<std::vector<T>*>& grad_in)>;

    GradTape() : gen_(next_gen()) {}

    uint64_t gen() const { return gen_; }

    // node id for a leaf tensor (identified by its data buffer)
    int leaf(const TensorT<T>& t) {
        auto it = leaves_.find(t.id());
        if (it != leaves_.end()) return it->second;
        int id = new_node(t.size());
        leaves_.emplace(t.id(), id);
        return id;
    }

    // id of a tensor if tracked: produced node, known leaf, or new leaf when
    // it requires grad; -1 otherwise
    int node_of(const TensorT<T>& t) {
        if (t.node >= 0 && t.gen == gen_) return t.node;
        auto it = leaves_.find(t.id());
        if (it != leaves_.end()) return it->second;
        if (t.requires_grad()) return leaf(t);
        return -1;
    }

    int record(std::vector<int> inputs, int64_t out_size, BackwardFn fn) {
        int out = new_node(out_size);
        entries_.push_back({std::move(inputs), out, std::move(fn)});
        return out;
    }

    GradMap<T> backward(const TensorT<T>& loss) const {
        check(loss.size() == 1, "backward: loss must be scalar");
        GradMap<T> grads;
        grads.leaves_ = leaves_;
        grads.gen_ = gen_;
        grads.by_node_.resize(node_sizes_.size());
        if (loss.node < 0 || loss.gen != gen_) return grads;  // constant loss: all grads zero
        grads.by_node_[loss.node] = {T(1)};
        std::vector<std::vector<T>*> gin;
        for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
            const Entry& e = *it;
            std::vector<T>& gout = grads.by_node_[e.output];
            if (gout.empty()) continue;
            gin.clear();
            for (int id : e.inputs) {
                if (id < 0) {
                    gin.push_back(nullptr);
                } else {
                    auto& g = grads.by_node_[id];
                    if (g.empty()) g.assign(node_sizes_[id], T(0));
                    gin.push_back(&g);
                }
            }
            e.backward(gout, gin);
        }
        return grads;
    }

    size_t num_ops() const { return entries_.size(); }

private:
    struct Entry {
        std::vector<int> inputs;
        int output;
        BackwardFn backward;
    };

    int new_node(int64_t sz) {
        node_sizes_.push_back(sz);
        return static_cast<int>(node_sizes_.size()) - 1;
    }

    static uint64_t next_gen() {
        static std::atomic<uint64_t> counter{1};
        return counter.fetch_add(1);
    }

    uint64_t gen_;
    std::vector<Entry> entries_;
    std::vector<int64_t> node_sizes_;
    std::unordered_map<const void*, int> leaves_;
};

template <typename T>
GradTape<T>*& active_tape() {
    thread_local GradTape<T>* tape = nullptr;
    return tape;
}

// RAII scope installing a tape for ops executed on this thread.
template <typename T>
class TapeScope {
public:
    explicit TapeScope(GradTape<T>& tape) : prev_(active_tape<T>()) { active_tape<T>() = &tape; }
    ~TapeScope() { active_tape<T>() = prev_; }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    GradTape<T>* prev_;
};

}  // namespace ss2r
