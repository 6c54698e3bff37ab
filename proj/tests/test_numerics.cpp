#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "ss2r/checkpoint.hpp"
#include "ss2r/gradcheck.hpp"
#include "ss2r/optim.hpp"

using namespace ss2r;

TEST_CASE("conv2d: identity kernel reproduces the input") {
    Tensor x = Tensor::from_data({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    Tensor k = Tensor::from_data({1, 1, 1, 1}, {1});
    Tensor y = ops::conv2d(x, k, 1, 0);
    REQUIRE(y.shape() == std::vector<int>({1, 1, 3, 3}));
    for (int i = 0; i < 9; ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("conv2d: hand-evaluated 2x2 cross-correlation") {
    Tensor x = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor k = Tensor::from_data({1, 1, 2, 2}, {1, 0, 0, 1});
    Tensor y = ops::conv2d(x, k, 1, 0);
    REQUIRE(y.size() == 1);
    CHECK(y.item() == 5.0f);
}

TEST_CASE("conv2d: zero input stays zero") {
    Tensor x({2, 3, 5, 5}, 0.0f);
    Tensor k = Tensor::randn({4, 3, 3, 3}, Rng(7), 1);
    Tensor y = ops::conv2d(x, k, 1, 1);
    for (int64_t i = 0; i < y.size(); ++i) CHECK(y.data()[i] == 0.0f);
}

TEST_CASE("conv2d: linearity on random inputs") {
    Rng rng(11);
    Tensor x = Tensor::randn({1, 2, 6, 6}, rng, 1);
    Tensor y = Tensor::randn({1, 2, 6, 6}, rng, 2);
    Tensor k = Tensor::randn({3, 2, 3, 3}, rng, 3);
    float a = 1.3f, b = -0.7f;
    Tensor lhs = ops::conv2d(ops::add(ops::scale(x, a), ops::scale(y, b)), k, 1, 1);
    Tensor rhs = ops::add(ops::scale(ops::conv2d(x, k, 1, 1), a),
                          ops::scale(ops::conv2d(y, k, 1, 1), b));
    for (int64_t i = 0; i < lhs.size(); ++i) {
        double denom = std::max(1e-3, static_cast<double>(std::abs(rhs.data()[i])));
        CHECK(std::abs(lhs.data()[i] - rhs.data()[i]) / denom < 1e-5);
    }
}

TEST_CASE("backward: sum gives all-ones gradient") {
    Tensor x = Tensor::randn({3, 4}, Rng(3), 1).set_requires_grad(true);
    GradTape<float> tape;
    TapeScope<float> scope(tape);
    Tensor loss = ops::sum(x);
    GradMap<float> g = tape.backward(loss);
    Tensor gx = g.grad(x);
    for (int64_t i = 0; i < gx.size(); ++i) CHECK(gx.data()[i] == 1.0f);
}

TEST_CASE("backward: sum of squares matches the analytic derivative") {
    Tensor x = Tensor::from_data({3}, {1, 2, 3}).set_requires_grad(true);
    GradTape<float> tape;
    TapeScope<float> scope(tape);
    Tensor loss = ops::sum(ops::mul(x, x));
    GradMap<float> g = tape.backward(loss);
    Tensor gx = g.grad(x);
    CHECK(gx.data()[0] == doctest::Approx(2));
    CHECK(gx.data()[1] == doctest::Approx(4));
    CHECK(gx.data()[2] == doctest::Approx(6));
}

TEST_CASE("backward: off-path parameters receive zero gradient") {
    Tensor x = Tensor::randn({4}, Rng(5), 1).set_requires_grad(true);
    Tensor unused = Tensor::randn({4}, Rng(5), 2).set_requires_grad(true);
    GradTape<float> tape;
    TapeScope<float> scope(tape);
    Tensor loss = ops::sum(ops::mul(x, x));
    GradMap<float> g = tape.backward(loss);
    Tensor gu = g.grad(unused);
    for (int64_t i = 0; i < gu.size(); ++i) CHECK(gu.data()[i] == 0.0f);
}

TEST_CASE("backward: non-scalar loss is rejected") {
    Tensor x = Tensor::randn({4}, Rng(5), 1).set_requires_grad(true);
    GradTape<float> tape;
    TapeScope<float> scope(tape);
    Tensor y = ops::mul(x, x);
    CHECK_THROWS_AS((void)tape.backward(y), std::invalid_argument);
}

TEST_CASE("backward: replaying the same tape twice is deterministic") {
    Rng rng(17);
    Tensor x = Tensor::randn({1, 1, 5, 5}, rng, 1).set_requires_grad(true);
    Tensor k = Tensor::randn({2, 1, 3, 3}, rng, 2).set_requires_grad(true);
    GradTape<float> tape;
    TapeScope<float> scope(tape);
    Tensor loss = ops::sum(ops::mul(ops::conv2d(x, k, 1, 1), ops::conv2d(x, k, 1, 1)));
    GradMap<float> g1 = tape.backward(loss);
    GradMap<float> g2 = tape.backward(loss);
    Tensor a = g1.grad(k), b = g2.grad(k);
    for (int64_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

TEST_CASE("backward: random 3-layer conv net against finite differences") {
    Rng rng(23);
    TensorT<double> x = TensorT<double>::randn({1, 1, 6, 6}, rng, 1, 0.7);
    TensorT<double> k1 = TensorT<double>::randn({2, 1, 3, 3}, rng, 2, 0.5);
    TensorT<double> k2 = TensorT<double>::randn({2, 2, 3, 3}, rng, 3, 0.5);
    TensorT<double> k3 = TensorT<double>::randn({1, 2, 3, 3}, rng, 4, 0.5);
    auto loss = [&]() {
        auto h = ops::silu(ops::conv2d(x, k1, 1, 1));
        h = ops::silu(ops::conv2d(h, k2, 1, 1));
        h = ops::conv2d(h, k3, 1, 1);
        return ops::sum(ops::mul(h, h));
    };
    double err = fd_max_rel_err({&x, &k1, &k2, &k3}, loss, 1e-3);
    CHECK(err < 1e-4);
}

TEST_CASE("gradcheck suite: every op under 1e-4") {
    for (const auto& e : run_gradcheck_suite(42)) {
        INFO(e.name);
        CHECK(e.max_rel_err < 1e-4);
    }
}

TEST_CASE("adamw: zero gradient and zero decay leave parameters unchanged") {
    ParamStore<float> params;
    params.add("p", Tensor::from_data({3}, {1.0f, -2.0f, 0.5f}));
    GradTape<float> tape;
    GradMap<float> zero_grads = tape.backward(Tensor::scalar(0.0f));
    AdamW<float> opt;
    opt.step(params, zero_grads);
    opt.step(params, zero_grads);
    CHECK(params.at("p").data()[0] == 1.0f);
    CHECK(params.at("p").data()[1] == -2.0f);
    CHECK(params.at("p").data()[2] == 0.5f);
}

TEST_CASE("adamw: first step moves a scalar by lr") {
    ParamStore<float> params;
    Tensor p = Tensor::scalar(1.0f);
    params.add("p", p);
    GradTape<float> tape;
    TapeScope<float> scope(tape);
    Tensor loss = ops::sum(params.at("p"));  // gradient exactly 1
    GradMap<float> grads = tape.backward(loss);
    AdamW<float>::Config cfg;
    cfg.lr = 3e-5f;
    AdamW<float> opt(cfg);
    opt.step(params, grads);
    CHECK(params.at("p").item() == doctest::Approx(1.0f - 3e-5f).epsilon(1e-6));
}

TEST_CASE("adamw: decoupled decay shrinks by (1 - lr*wd)") {
    ParamStore<float> params;
    params.add("p", Tensor::scalar(2.0f));
    GradTape<float> tape;
    GradMap<float> zero_grads = tape.backward(Tensor::scalar(0.0f));
    AdamW<float>::Config cfg;
    cfg.lr = 3e-5f;
    cfg.weight_decay = 0.01f;
    AdamW<float> opt(cfg);
    opt.step(params, zero_grads);
    CHECK(params.at("p").item() == doctest::Approx(2.0f * (1.0f - 3e-5f * 0.01f)).epsilon(1e-9));
}

TEST_CASE("adamw: non-finite gradients reject the step") {
    ParamStore<float> params;
    Tensor p = Tensor::scalar(1.0f);
    params.add("p", p);
    GradTape<float> tape;
    TapeScope<float> scope(tape);
    Tensor bad = Tensor::scalar(std::numeric_limits<float>::infinity());
    Tensor loss = ops::sum(ops::mul(params.at("p"), bad));
    GradMap<float> grads = tape.backward(loss);
    AdamW<float> opt;
    CHECK_THROWS_AS(opt.step(params, grads), std::runtime_error);
    CHECK(params.at("p").item() == 1.0f);
}

TEST_CASE("layer ops: group norm of constant input is zero before affine") {
    Tensor x({2, 4, 3, 3}, 2.5f);
    Tensor g({4}, 1.0f), b({4}, 0.0f);
    Tensor y = ops::group_norm(x, 2, g, b);
    for (int64_t i = 0; i < y.size(); ++i) CHECK(y.data()[i] == doctest::Approx(0.0f));
}

TEST_CASE("layer ops: channel-wise max over points") {
    Tensor x = Tensor::from_data({1, 2, 2}, {1, 5, 3, 2});
    Tensor y = ops::reduce_max_points(x);
    CHECK(y.data()[0] == 3.0f);
    CHECK(y.data()[1] == 5.0f);
}

TEST_CASE("layer ops: nearest upsample repeats 2x2 blocks") {
    Tensor x = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor y = ops::upsample_nearest2(x);
    std::vector<float> want = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
    REQUIRE(y.size() == 16);
    for (int i = 0; i < 16; ++i) CHECK(y.data()[i] == want[i]);
}

TEST_CASE("conv2d: shape mismatch raises a diagnostic") {
    Tensor x({1, 2, 4, 4}, 0.0f);
    Tensor k({1, 3, 3, 3}, 0.0f);
    CHECK_THROWS_AS((void)ops::conv2d(x, k, 1, 1), std::invalid_argument);
}

TEST_CASE("checkpoint: round-trips bit-exactly") {
    ParamStore<float> params;
    Rng rng(99);
    params.add("alpha", Tensor::randn({3, 4}, rng, 1));
    params.add("beta.w", Tensor::randn({2, 2, 3, 3}, rng, 2));
    params.add("gamma", Tensor::scalar(0.123456789f));
    auto path = std::filesystem::temp_directory_path() / "ss2r_ckpt_test.bin";
    save_checkpoint(path.string(), params);
    ParamStore<float> loaded = load_checkpoint(path.string());
    REQUIRE(loaded.size() == params.size());
    for (const auto& [name, t] : params) {
        const Tensor& l = loaded.at(name);
        REQUIRE(l.shape() == t.shape());
        for (int64_t i = 0; i < t.size(); ++i) CHECK(l.data()[i] == t.data()[i]);
    }
    std::filesystem::remove(path);
}

TEST_CASE("tensors: data length always matches shape") {
    CHECK_THROWS_AS((void)Tensor::from_data({2, 3}, {1, 2, 3}), std::invalid_argument);
}
