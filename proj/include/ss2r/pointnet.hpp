#pragma once

#include <string>

#include "ss2r/ops.hpp"
#include "ss2r/params.hpp"

namespace ss2r {

// Per-point shared MLP with channel-wise max aggregation, a single-layer
// branch for the CAD-side points, and a dense head on the concatenated
// global features. Everything per-point is position-wise, so the output is
// exactly permutation invariant.
struct PointClassifierConfig {
    int width = 64;
    int points_per_patch = 256;

    void validate() const { check(width >= 1, "classifier: bad width"); }
};

template <typename T>
ParamStore<T> init_point_classifier(const PointClassifierConfig& cfg, uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    ParamStore<T> p;
    int w = cfg.width;
    auto dense_init = [&](const std::string& name, int in_c, int out_c, uint64_t stream,
                          bool zero) {
        T sd = zero ? T(0) : static_cast<T>(std::sqrt(2.0 / in_c));
        p.add(name + ".w", TensorT<T>::randn({in_c, out_c}, rng, stream, sd));
        p.add(name + ".b", TensorT<T>::zeros({out_c}));
    };
    dense_init("pt.fc1", 3, w, 1, false);
    dense_init("pt.fc2", w, w, 2, false);
    dense_init("pt.fc3", w, w, 3, false);
    dense_init("cad.fc1", 3, w, 4, false);
    dense_init("head.fc1", 2 * w, w, 5, false);
    dense_init("head.fc2", w, 1, 6, /*zero=*/true);  // zero head: untrained output is 0.5
    return p;
}

// pts, cad: [N, P, 3] centered point sets -> logits [N, 1]
template <typename T>
TensorT<T> point_classifier_logits(const ParamStore<T>& p, const TensorT<T>& pts,
                                   const TensorT<T>& cad) {
    check(pts.rank() == 3 && pts.dim(2) == 3, "classifier: expects [N,P,3] points");
    check(cad.rank() == 3 && cad.dim(2) == 3, "classifier: expects [N,P,3] cad points");
    check(pts.dim(0) == cad.dim(0), "classifier: batch mismatch");
    int N = pts.dim(0), P = pts.dim(1), Pc = cad.dim(1);

    auto shared_dense = [&](const TensorT<T>& x, int n, int pcount, const std::string& name) {
        TensorT<T> flat = ops::reshape(x, {n * pcount, x.dim(2)});
        TensorT<T> y = ops::dense(flat, p.at(name + ".w"), p.at(name + ".b"));
        return ops::reshape(y, {n, pcount, y.dim(1)});
    };

    TensorT<T> h = ops::silu(shared_dense(pts, N, P, "pt.fc1"));
    h = ops::silu(shared_dense(h, N, P, "pt.fc2"));
    h = shared_dense(h, N, P, "pt.fc3");
    TensorT<T> global = ops::reduce_max_points(h);  // [N, w]

    TensorT<T> c = shared_dense(cad, N, Pc, "cad.fc1");
    TensorT<T> cad_global = ops::reduce_max_points(c);  // [N, w]

    TensorT<T> feat = ops::concat_channels(global, cad_global);  // [N, 2w]
    TensorT<T> head = ops::silu(ops::dense(feat, p.at("head.fc1.w"), p.at("head.fc1.b")));
    return ops::dense(head, p.at("head.fc2.w"), p.at("head.fc2.b"));
}

}  // namespace ss2r
