#include <doctest.h>

#include <cmath>

#include "ss2r/diffusion.hpp"

using namespace ss2r;

TEST_CASE("schedule: tables match a direct product oracle") {
    NoiseSchedule s = make_schedule(1000, 1e-4, 0.02);
    double prod = 1.0;
    for (int t = 0; t < 1000; ++t) {
        double beta = 1e-4 + (0.02 - 1e-4) * t / 999.0;
        CHECK(s.beta[t] == doctest::Approx(beta).epsilon(1e-12));
        prod *= 1.0 - beta;
        CHECK(s.alpha_bar[t] == doctest::Approx(prod).epsilon(1e-12));
    }
    CHECK(s.alpha_bar[999] < 1e-4);
    CHECK(s.alpha_bar[999] > 0.0);
}

TEST_CASE("schedule: single step") {
    NoiseSchedule s = make_schedule(1, 0.5, 0.5);
    REQUIRE(s.T == 1);
    CHECK(s.alpha_bar[0] == doctest::Approx(0.5));
}

TEST_CASE("schedule: alpha_bar strictly decreasing, sigma nonnegative") {
    for (uint64_t seed : {1u, 2u, 3u}) {
        Rng rng(seed);
        double b0 = 1e-5 + rng.uniform(0, 0) * 1e-3;
        double b1 = b0 + rng.uniform(0, 1) * 0.05;
        NoiseSchedule s = make_schedule(200, b0, b1);
        for (int t = 1; t < s.T; ++t) CHECK(s.alpha_bar[t] < s.alpha_bar[t - 1]);
        for (int t = 0; t < s.T; ++t) CHECK(s.sigma[t] >= 0.0);
        CHECK(s.alpha_bar[0] > 0.99);
    }
}

TEST_CASE("schedule: invalid ranges rejected") {
    CHECK_THROWS_AS(make_schedule(0, 1e-4, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(10, 0.0, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(10, 0.03, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(10, 0.5, 1.0), std::invalid_argument);
}

TEST_CASE("forward_diffuse: no-noise limit returns x0 exactly") {
    // beta small enough that alpha_bar rounds to 1.0
    NoiseSchedule s = make_schedule(1, 1e-30, 1e-30);
    REQUIRE(s.alpha_bar[0] == 1.0);
    Tensor x0 = Tensor::randn({2, 3}, Rng(1), 1);
    Tensor eps = Tensor::randn({2, 3}, Rng(1), 2);
    Tensor xt = forward_diffuse(x0, 0, eps, s);
    for (int64_t i = 0; i < x0.size(); ++i) CHECK(xt.data()[i] == x0.data()[i]);
}

TEST_CASE("forward_diffuse: zero eps scales by sqrt(alpha_bar)") {
    NoiseSchedule s = make_schedule(100, 1e-4, 0.02);
    Tensor x0 = Tensor::randn({4, 4}, Rng(2), 1);
    Tensor eps({4, 4}, 0.0f);
    int t = 57;
    Tensor xt = forward_diffuse(x0, t, eps, s);
    float a = static_cast<float>(std::sqrt(s.alpha_bar[t]));
    for (int64_t i = 0; i < x0.size(); ++i)
        CHECK(xt.data()[i] == doctest::Approx(a * x0.data()[i]));
}

TEST_CASE("forward_diffuse: out-of-range t rejected") {
    NoiseSchedule s = make_schedule(10, 1e-4, 0.02);
    Tensor x0({2}, 0.0f), eps({2}, 0.0f);
    CHECK_THROWS_AS((void)forward_diffuse(x0, 10, eps, s), std::invalid_argument);
    CHECK_THROWS_AS((void)forward_diffuse(x0, -1, eps, s), std::invalid_argument);
}

TEST_CASE("forward_diffuse: empirical variance matches 1 - alpha_bar") {
    NoiseSchedule s = make_schedule(1000, 1e-4, 0.02);
    Rng rng(7);
    const int n = 100000;
    for (int t : {100, 500, 900}) {
        double want = 1.0 - s.alpha_bar[t];
        double sum = 0, sum2 = 0;
        double b = std::sqrt(want);
        for (int i = 0; i < n; ++i) {
            double x = b * rng.normal(t, i);  // x0 = 0
            sum += x;
            sum2 += x * x;
        }
        double mean = sum / n;
        double var = sum2 / n - mean * mean;
        double se = want * std::sqrt(2.0 / (n - 1));
        CHECK(std::abs(var - want) < 3 * se);
    }
}

TEST_CASE("ddpm_step: inverts forward_diffuse exactly at the final step") {
    NoiseSchedule s = make_schedule(1000, 1e-4, 0.02);
    Rng rng(11);
    Tensor x0 = Tensor::randn({1, 1, 4, 4}, rng, 1);
    Tensor eps = Tensor::randn({1, 1, 4, 4}, rng, 2);
    Tensor zero({1, 1, 4, 4}, 0.0f);
    Tensor xt = forward_diffuse(x0, 0, eps, s);
    Tensor rec = ddpm_step(xt, 0, eps, s, zero);
    // at t=0 the previous level is the clean sample
    for (int64_t i = 0; i < x0.size(); ++i) {
        double denom = std::max(1e-3, std::abs(static_cast<double>(x0.data()[i])));
        CHECK(std::abs(rec.data()[i] - x0.data()[i]) / denom < 1e-5);
    }
}

TEST_CASE("ddpm_step: degenerate alpha = 1 is the identity") {
    NoiseSchedule s;
    s.T = 2;
    s.beta = {0.1, 0.0};
    s.alpha = {0.9, 1.0};
    s.alpha_bar = {0.9, 0.9};
    s.sigma = {std::sqrt(0.1), 0.0};
    Tensor x = Tensor::randn({3, 3}, Rng(5), 1);
    Tensor eps = Tensor::randn({3, 3}, Rng(5), 2);
    Tensor zero({3, 3}, 0.0f);
    Tensor y = ddpm_step(x, 1, eps, s, zero);
    for (int64_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("ddpm_step: deterministic with zero noise") {
    NoiseSchedule s = make_schedule(50, 1e-4, 0.02);
    Rng rng(13);
    Tensor x = Tensor::randn({2, 5}, rng, 1);
    Tensor eps = Tensor::randn({2, 5}, rng, 2);
    Tensor zero({2, 5}, 0.0f);
    Tensor a = ddpm_step(x, 20, eps, s, zero);
    Tensor b = ddpm_step(x, 20, eps, s, zero);
    for (int64_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

TEST_CASE("ddim_step: eta=0 with the true eps recovers x0") {
    NoiseSchedule s = make_schedule(1000, 1e-4, 0.02);
    Rng rng(17);
    Tensor x0 = Tensor::randn({1, 1, 4, 4}, rng, 1);
    Tensor eps = Tensor::randn({1, 1, 4, 4}, rng, 2);
    Tensor none;
    for (int t : {1, 400, 999}) {
        Tensor xt = forward_diffuse(x0, t, eps, s);
        Tensor x0_hat = predict_x0(xt, t, eps, s);
        Tensor stepped = ddim_step(xt, t, -1, eps, s, 0.0, none);
        for (int64_t i = 0; i < x0.size(); ++i) {
            double denom = std::max(1e-3, std::abs(static_cast<double>(x0.data()[i])));
            CHECK(std::abs(x0_hat.data()[i] - x0.data()[i]) / denom < 1e-4);
            CHECK(std::abs(stepped.data()[i] - x0.data()[i]) / denom < 1e-4);
        }
    }
}

TEST_CASE("ddim_step: bitwise deterministic at eta=0") {
    NoiseSchedule s = make_schedule(100, 1e-4, 0.02);
    Rng rng(19);
    Tensor x = Tensor::randn({2, 8}, rng, 1);
    Tensor eps = Tensor::randn({2, 8}, rng, 2);
    Tensor none;
    Tensor a = ddim_step(x, 60, 40, eps, s, 0.0, none);
    Tensor b = ddim_step(x, 60, 40, eps, s, 0.0, none);
    for (int64_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

TEST_CASE("ddim_step: t_prev >= t rejected") {
    NoiseSchedule s = make_schedule(100, 1e-4, 0.02);
    Tensor x({2}, 0.0f), eps({2}, 0.0f), none;
    CHECK_THROWS_AS((void)ddim_step(x, 10, 10, eps, s, 0.0, none), std::invalid_argument);
    CHECK_THROWS_AS((void)ddim_step(x, 10, 11, eps, s, 0.0, none), std::invalid_argument);
}

namespace {

// optimal eps prediction for a unit-normal 1-D target
double oracle_eps(double x_t, double abar) {
    return x_t * std::sqrt(1.0 - abar);
}

}  // namespace

TEST_CASE("ddim eta=1 with t_prev=t-1 statistically matches ancestral sampling") {
    // 1-D toy target N(0,1): both samplers must transport N(0,1) to N(0,1)
    NoiseSchedule s = make_schedule(200, 1e-4, 0.02);
    Rng rng(23);
    const int n = 20000;
    std::vector<double> ddpm_out(n), ddim_out(n);
    for (int i = 0; i < n; ++i) {
        double xa = rng.normal(1, i);
        double xb = rng.normal(2, i);
        uint64_t ctr = 0;
        for (int t = s.T - 1; t >= 0; --t) {
            double na = t > 0 ? rng.normal(1000 + i, ctr) : 0.0;
            double nb = t > 0 ? rng.normal(2000000 + i, ctr) : 0.0;
            ++ctr;
            // ancestral update
            double ea = oracle_eps(xa, s.alpha_bar[t]);
            double c1 = 1.0 / std::sqrt(s.alpha[t]);
            double c2 = (1.0 - s.alpha[t]) / std::sqrt(s.alpha[t] * (1.0 - s.alpha_bar[t]));
            xa = c1 * xa - c2 * ea + s.sigma[t] * na;
            // ddim eta=1 update
            double eb = oracle_eps(xb, s.alpha_bar[t]);
            double abar_p = t > 0 ? s.alpha_bar[t - 1] : 1.0;
            double sig = t > 0 ? std::sqrt((1.0 - abar_p) / (1.0 - s.alpha_bar[t])) *
                                     std::sqrt(1.0 - s.alpha_bar[t] / abar_p)
                               : 0.0;
            double x0_hat = (xb - std::sqrt(1.0 - s.alpha_bar[t]) * eb) /
                            std::sqrt(s.alpha_bar[t]);
            double dir = std::sqrt(std::max(0.0, 1.0 - abar_p - sig * sig));
            xb = std::sqrt(abar_p) * x0_hat + dir * eb + sig * nb;
        }
        ddpm_out[i] = xa;
        ddim_out[i] = xb;
    }
    auto stats = [&](const std::vector<double>& v) {
        double m = 0, q = 0;
        for (double x : v) m += x;
        m /= v.size();
        for (double x : v) q += (x - m) * (x - m);
        return std::pair<double, double>{m, q / (v.size() - 1)};
    };
    auto [ma, va] = stats(ddpm_out);
    auto [mb, vb] = stats(ddim_out);
    double se_mean = std::sqrt(va / n + vb / n);
    double se_var = std::sqrt(2.0 / (n - 1)) * std::max(va, vb) * std::sqrt(2.0);
    CHECK(std::abs(ma - mb) < 4 * se_mean);
    CHECK(std::abs(va - vb) < 4 * se_var);
    CHECK(std::abs(va - 1.0) < 0.05);
}

namespace {

DiffusionBatch<float> make_batch(int B, int H, uint64_t seed, bool with_mask) {
    Rng rng(seed);
    DiffusionBatch<float> b;
    b.x0 = Tensor::randn({B, 1, H, H}, rng, 1, 0.3f);
    b.eps = Tensor::randn({B, 1, H, H}, rng, 2);
    b.condition = Tensor::randn({B, 1, H, H}, rng, 3);
    b.valid_mask = Tensor({B, 1, H, H}, 1.0f);
    for (int i = 0; i < B; ++i) b.t.push_back(static_cast<int>(rng.uniform(4, i) * 100));
    if (with_mask) b.weight_mask = Tensor({B, 1, H, H}, 1.0f);
    return b;
}

}  // namespace

TEST_CASE("stage1_loss: perfect predictor gives zero loss") {
    NoiseSchedule s = make_schedule(100, 1e-4, 0.02);
    DiffusionBatch<float> b = make_batch(2, 8, 31, false);
    auto perfect = [&](const Tensor&, const std::vector<int>&, const Tensor&) { return b.eps; };
    CHECK(stage1_loss(b, perfect, s).item() == 0.0f);
}

TEST_CASE("stage1_loss: zero predictor gives the unit second moment") {
    NoiseSchedule s = make_schedule(100, 1e-4, 0.02);
    DiffusionBatch<float> b = make_batch(8, 48, 37, false);
    auto zero = [](const Tensor& x, const std::vector<int>&, const Tensor&) {
        return Tensor(x.shape(), 0.0f);
    };
    double n = static_cast<double>(b.eps.size());
    double se = std::sqrt(2.0 / n);
    CHECK(std::abs(stage1_loss(b, zero, s).item() - 1.0) < 5 * se);
}

TEST_CASE("stage1_loss: non-negative for random predictors") {
    NoiseSchedule s = make_schedule(100, 1e-4, 0.02);
    for (uint64_t seed = 0; seed < 5; ++seed) {
        DiffusionBatch<float> b = make_batch(2, 8, 41 + seed, false);
        Rng rng(seed);
        auto noisy = [&](const Tensor& x, const std::vector<int>&, const Tensor&) {
            return Tensor::randn(x.shape(), rng, 77);
        };
        CHECK(stage1_loss(b, noisy, s).item() >= 0.0f);
    }
}

TEST_CASE("stage2_loss: all-omega unit mask reduces to stage1_loss") {
    NoiseSchedule s = make_schedule(100, 1e-4, 0.02);
    DiffusionBatch<float> b = make_batch(3, 16, 43, true);
    Rng rng(5);
    Tensor k = Tensor::randn({1, 1, 3, 3}, rng, 1, 0.4f);
    auto den = [&](const Tensor& x, const std::vector<int>&, const Tensor&) {
        return ops::conv2d(x, k, 1, 1);
    };
    float l1 = stage1_loss(b, den, s).item();
    float l2 = stage2_loss(b, den, s, 1.0, 2.0).item();  // mask is all ones = omega
    CHECK(std::abs(l2 - l1) <= 1e-6 * std::abs(l1));
}

TEST_CASE("stage2_loss: perfect predictor gives zero under any mask") {
    NoiseSchedule s = make_schedule(100, 1e-4, 0.02);
    DiffusionBatch<float> b = make_batch(2, 8, 47, true);
    for (int64_t i = 0; i < b.weight_mask.size(); ++i)
        b.weight_mask.data()[i] = i % 2 ? 1.5f : 0.5f;
    auto perfect = [&](const Tensor&, const std::vector<int>&, const Tensor&) { return b.eps; };
    CHECK(stage2_loss(b, perfect, s, 0.5, 1.5).item() == 0.0f);
}

TEST_CASE("stage2_loss: zero predictor with half/half mask averages the weights") {
    NoiseSchedule s = make_schedule(100, 1e-4, 0.02);
    DiffusionBatch<float> b = make_batch(8, 48, 53, true);
    for (int64_t i = 0; i < b.weight_mask.size(); ++i)
        b.weight_mask.data()[i] = i % 2 ? 1.5f : 0.5f;
    auto zero = [](const Tensor& x, const std::vector<int>&, const Tensor&) {
        return Tensor(x.shape(), 0.0f);
    };
    double n = static_cast<double>(b.eps.size());
    double se = std::sqrt(2.0 / n) * 1.5;
    CHECK(std::abs(stage2_loss(b, zero, s, 0.5, 1.5).item() - 1.0) < 5 * se);
}

TEST_CASE("stage2_loss: lambda <= omega and missing mask rejected") {
    NoiseSchedule s = make_schedule(100, 1e-4, 0.02);
    DiffusionBatch<float> b = make_batch(1, 8, 59, true);
    auto zero = [](const Tensor& x, const std::vector<int>&, const Tensor&) {
        return Tensor(x.shape(), 0.0f);
    };
    CHECK_THROWS_AS((void)stage2_loss(b, zero, s, 1.5, 0.5), std::invalid_argument);
    CHECK_THROWS_AS((void)stage2_loss(b, zero, s, 1.0, 1.0), std::invalid_argument);
    b.weight_mask = Tensor();
    CHECK_THROWS_AS((void)stage2_loss(b, zero, s, 0.5, 1.5), std::invalid_argument);
}

TEST_CASE("closed form: iterated single-step noising matches the marginal") {
    // x_{t} = sqrt(alpha_t) x_{t-1} + sqrt(beta_t) n_t  vs  the closed form
    NoiseSchedule s = make_schedule(50, 1e-3, 0.05);
    Rng rng(61);
    const int n = 20000;
    const double x0 = 0.7;
    const int k = 49;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        double x = x0;
        for (int t = 0; t <= k; ++t)
            x = std::sqrt(s.alpha[t]) * x + std::sqrt(s.beta[t]) * rng.normal(i, t);
        sum += x;
        sum2 += x * x;
    }
    double mean = sum / n;
    double var = sum2 / n - mean * mean;
    double want_mean = std::sqrt(s.alpha_bar[k]) * x0;
    double want_var = 1.0 - s.alpha_bar[k];
    double se_mean = std::sqrt(want_var / n);
    double se_var = want_var * std::sqrt(2.0 / (n - 1));
    CHECK(std::abs(mean - want_mean) < 3 * se_mean);
    CHECK(std::abs(var - want_var) < 3 * se_var);
}

TEST_CASE("ddim_timesteps: descending, unique, spans the range") {
    for (int steps : {2, 7, 50}) {
        std::vector<int> ts = ddim_timesteps(1000, steps);
        CHECK(ts.front() == 999);
        CHECK(ts.back() == 0);
        for (size_t i = 1; i < ts.size(); ++i) CHECK(ts[i] < ts[i - 1]);
    }
    std::vector<int> tiny = ddim_timesteps(1000, 1);
    REQUIRE(tiny.size() == 1);
    CHECK(tiny[0] == 999);
}
