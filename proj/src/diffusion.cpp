#include "ss2r/diffusion.hpp"

namespace ss2r {

NoiseSchedule make_schedule(int T, double beta_start, double beta_end, ScheduleKind kind) {
    check(T >= 1, "schedule: T must be >= 1");
    check(beta_start > 0 && beta_start <= beta_end && beta_end < 1,
          "schedule: need 0 < beta_start <= beta_end < 1");
    check(kind == ScheduleKind::linear, "schedule: unknown kind");
    NoiseSchedule s;
    s.T = T;
    s.beta.resize(T);
    s.alpha.resize(T);
    s.alpha_bar.resize(T);
    s.sigma.resize(T);
    double prod = 1.0;
    for (int t = 0; t < T; ++t) {
        double b = T == 1 ? beta_start
                          : beta_start + (beta_end - beta_start) * static_cast<double>(t) /
                                             static_cast<double>(T - 1);
        s.beta[t] = b;
        s.alpha[t] = 1.0 - b;
        prod *= s.alpha[t];
        s.alpha_bar[t] = prod;
        s.sigma[t] = std::sqrt(b);
    }
    return s;
}

std::vector<int> ddim_timesteps(int T, int steps) {
    check(T >= 1 && steps >= 1, "ddim_timesteps: bad arguments");
    steps = std::min(steps, T);
    std::vector<int> out;
    out.reserve(steps);
    if (steps == 1) {
        out.push_back(T - 1);
        return out;
    }
    int prev = -1;
    for (int i = 0; i < steps; ++i) {
        int t = static_cast<int>(std::llround(static_cast<double>(T - 1) *
                                              static_cast<double>(steps - 1 - i) /
                                              static_cast<double>(steps - 1)));
        if (t == prev) continue;
        out.push_back(t);
        prev = t;
    }
    return out;  // descending, ends at 0
}

}  // namespace ss2r
