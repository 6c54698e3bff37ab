#include "ss2r/unet.hpp"

namespace ss2r {

ParamStore<float> adapt_to_stage2(const ParamStore<float>& stage1, const DenoiserConfig& cfg1,
                                  const DenoiserConfig& cfg2) {
    check(cfg1.cond_channels == 1 && cfg2.cond_channels == 2,
          "adapt_to_stage2: expects 1 -> 2 condition channels");
    check(cfg1.base_width == cfg2.base_width && cfg1.levels == cfg2.levels &&
              cfg1.blocks_per_level == cfg2.blocks_per_level && cfg1.time_dim == cfg2.time_dim,
          "adapt_to_stage2: topologies must match");
    ParamStore<float> out;
    for (const auto& [name, t] : stage1) {
        if (name == "cond.in.w") {
            int w0 = t.dim(0);
            Tensor widened = Tensor::zeros({w0, 2, 3, 3});
            for (int o = 0; o < w0; ++o)
                for (int i = 0; i < 9; ++i)
                    widened.data()[(o * 2) * 9 + i] = t.data()[o * 9 + i];
            out.add(name, widened);
        } else {
            out.add(name, Tensor::from_data(t.shape(), t.vec()));
        }
    }
    return out;
}

}  // namespace ss2r
