#include "ss2r/gradcheck.hpp"

#include "ss2r/diffusion.hpp"
#include "ss2r/pointnet.hpp"
#include "ss2r/unet.hpp"

namespace ss2r {

namespace {

using D = TensorT<double>;

D weighted_sq_sum(const D& x) {
    // fixed positive weights keep reduction gradients non-uniform
    D w(x.shape());
    for (int64_t i = 0; i < w.size(); ++i)
        w.data()[i] = 0.5 + 0.1 * static_cast<double>(i % 7);
    return ops::sum(ops::mul(ops::mul(x, x), w));
}

D randn(std::vector<int> shape, const Rng& rng, uint64_t stream, double scale = 1.0) {
    return D::randn(std::move(shape), rng, stream, scale);
}

}  // namespace

std::vector<GradCheckEntry> run_gradcheck_suite(uint64_t seed) {
    Rng rng(seed);
    std::vector<GradCheckEntry> out;
    auto run = [&](const std::string& name, std::vector<D*> inputs,
                   const std::function<D()>& fn) {
        out.push_back({name, fd_max_rel_err(std::move(inputs), fn)});
    };

    {
        D a = randn({2, 3}, rng, 1), b = randn({2, 3}, rng, 2);
        run("add", {&a, &b}, [&] { return weighted_sq_sum(ops::add(a, b)); });
    }
    {
        D a = randn({2, 3}, rng, 3), b = randn({2, 3}, rng, 4);
        run("sub", {&a, &b}, [&] { return weighted_sq_sum(ops::sub(a, b)); });
    }
    {
        D a = randn({2, 3}, rng, 5), b = randn({2, 3}, rng, 6);
        run("mul", {&a, &b}, [&] { return ops::sum(ops::mul(a, b)); });
    }
    {
        D a = randn({7}, rng, 7);
        run("scale", {&a}, [&] { return weighted_sq_sum(ops::scale(a, 1.7)); });
    }
    {
        D a = randn({7}, rng, 8);
        run("add_scalar", {&a}, [&] { return weighted_sq_sum(ops::add_scalar(a, 0.3)); });
    }
    {
        D a = randn({3, 5}, rng, 9);
        run("silu", {&a}, [&] { return weighted_sq_sum(ops::silu(a)); });
    }
    {
        D a = randn({3, 5}, rng, 10);
        run("sigmoid", {&a}, [&] { return weighted_sq_sum(ops::sigmoid(a)); });
    }
    {
        D a = randn({4, 4}, rng, 11);
        run("sum", {&a}, [&] { return ops::sum(a); });
    }
    {
        D a = randn({4, 4}, rng, 12);
        run("mean", {&a}, [&] { return weighted_sq_sum(ops::mean(a)); });
    }
    {
        D a = randn({2, 6}, rng, 13);
        run("reshape", {&a}, [&] { return weighted_sq_sum(ops::reshape(a, {3, 4})); });
    }
    {
        D a = randn({2, 2, 3, 3}, rng, 14), b = randn({2, 3, 3, 3}, rng, 15);
        run("concat_channels", {&a, &b},
            [&] { return weighted_sq_sum(ops::concat_channels(a, b)); });
    }
    {
        D x = randn({3, 4}, rng, 16), w = randn({4, 5}, rng, 17), b = randn({5}, rng, 18);
        run("dense", {&x, &w, &b}, [&] { return weighted_sq_sum(ops::dense(x, w, b)); });
    }
    {
        D x = randn({2, 3, 6, 6}, rng, 19), k = randn({4, 3, 3, 3}, rng, 20),
          b = randn({4}, rng, 21);
        run("conv2d_s1p1", {&x, &k, &b},
            [&] { return weighted_sq_sum(ops::conv2d(x, k, b, 1, 1)); });
    }
    {
        D x = randn({1, 2, 7, 7}, rng, 22), k = randn({3, 2, 3, 3}, rng, 23),
          b = randn({3}, rng, 24);
        run("conv2d_s2p0", {&x, &k, &b},
            [&] { return weighted_sq_sum(ops::conv2d(x, k, b, 2, 0)); });
    }
    {
        D x = randn({2, 4, 3, 3}, rng, 25), g = randn({4}, rng, 26, 0.3),
          b = randn({4}, rng, 27, 0.3);
        run("group_norm", {&x, &g, &b},
            [&] { return weighted_sq_sum(ops::group_norm(x, 2, g, b)); });
    }
    {
        D x = randn({2, 2, 3, 3}, rng, 28);
        run("upsample_nearest2", {&x},
            [&] { return weighted_sq_sum(ops::upsample_nearest2(x)); });
    }
    {
        D x = randn({2, 2, 4, 4}, rng, 29);
        run("downsample_nearest2", {&x},
            [&] { return weighted_sq_sum(ops::downsample_nearest2(x)); });
    }
    {
        D x = randn({2, 3, 4, 4}, rng, 30), v = randn({2, 3}, rng, 31);
        run("add_channel_bias", {&x, &v},
            [&] { return weighted_sq_sum(ops::add_channel_bias(x, v)); });
    }
    {
        // spread values out so the finite-difference step cannot flip argmax
        D x = randn({2, 5, 3}, rng, 32, 3.0);
        run("reduce_max_points", {&x},
            [&] { return weighted_sq_sum(ops::reduce_max_points(x)); });
    }
    {
        D z = randn({6, 1}, rng, 33);
        D y({6, 1});
        for (int i = 0; i < 6; ++i) y.data()[i] = i % 2;
        run("bce_with_logits", {&z}, [&] { return ops::bce_with_logits_mean(z, y); });
    }
    {
        // stage losses through a tiny linear "denoiser"
        NoiseSchedule s = make_schedule(10, 1e-4, 0.02);
        DiffusionBatch<double> batch;
        batch.x0 = randn({2, 1, 4, 4}, rng, 34, 0.3);
        batch.eps = randn({2, 1, 4, 4}, rng, 35);
        batch.condition = randn({2, 1, 4, 4}, rng, 36);
        batch.t = {3, 7};
        batch.valid_mask = D({2, 1, 4, 4}, 1.0);
        batch.weight_mask = D({2, 1, 4, 4});
        for (int64_t i = 0; i < batch.weight_mask.size(); ++i)
            batch.weight_mask.data()[i] = i % 2 ? 1.5 : 0.5;
        D k = randn({1, 1, 3, 3}, rng, 37, 0.5);
        auto den = [&](const D& x_t, const std::vector<int>&, const D& cond) {
            return ops::add(ops::conv2d(x_t, k, 1, 1), ops::scale(cond, 0.1));
        };
        run("stage1_loss", {&k}, [&] { return stage1_loss(batch, den, s); });
        run("stage2_loss", {&k}, [&] { return stage2_loss(batch, den, s, 0.5, 1.5); });
    }
    {
        // full denoiser at reduced configuration
        DenoiserConfig cfg;
        cfg.resolution = 8;
        cfg.base_width = 4;
        cfg.levels = 2;
        cfg.blocks_per_level = 1;
        cfg.time_dim = 8;
        cfg.cond_channels = 1;
        ParamStore<double> p = init_denoiser<double>(cfg, rng.derive(100, 0));
        // perturb zero-initialized layers so their gradients are exercised too
        RngStream zs(rng, 101);
        for (auto& [name, t] : p)
            for (int64_t i = 0; i < t.size(); ++i)
                if (t.data()[i] == 0.0) t.data()[i] = 0.05 * zs.normal();
        D x = randn({1, 1, 8, 8}, rng, 102, 0.5);
        D cond = randn({1, 1, 8, 8}, rng, 103, 0.5);
        std::vector<TensorT<double>*> inputs;
        for (auto& [name, t] : p) inputs.push_back(&t);
        run("denoiser_full", inputs, [&] {
            return ops::mean(weighted_sq_sum(predict_noise(p, cfg, x, {3}, cond)));
        });
    }
    {
        // full point classifier at reduced configuration
        PointClassifierConfig cfg;
        cfg.width = 4;
        ParamStore<double> p = init_point_classifier<double>(cfg, rng.derive(200, 0));
        RngStream zs(rng, 201);
        for (auto& [name, t] : p)
            for (int64_t i = 0; i < t.size(); ++i)
                if (t.data()[i] == 0.0) t.data()[i] = 0.05 * zs.normal();
        D pts = randn({2, 6, 3}, rng, 202, 2.0);
        D cad = randn({2, 6, 3}, rng, 203, 2.0);
        D y({2, 1});
        y.data()[0] = 1;
        std::vector<TensorT<double>*> inputs;
        for (auto& [name, t] : p) inputs.push_back(&t);
        run("point_classifier_full", inputs, [&] {
            return ops::bce_with_logits_mean(point_classifier_logits(p, pts, cad), y);
        });
    }
    return out;
}

}  // namespace ss2r
