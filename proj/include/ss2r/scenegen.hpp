#pragma once

#include <variant>
#include <vector>

#include "ss2r/depth.hpp"
#include "ss2r/rng.hpp"

namespace ss2r {

struct SpherePrim {
    Vec3 center;
    double radius;
};

struct BoxPrim {
    Vec3 lo, hi;  // axis-aligned corners, world frame
};

struct PlanePrim {
    Vec3 point, normal;  // infinite plane
};

using Primitive = std::variant<SpherePrim, BoxPrim, PlanePrim>;

struct Scene {
    std::vector<Primitive> prims;
};

struct SceneLayoutParams {
    int min_objects = 2;
    int max_objects = 5;
    double object_z_min = 1.2;
    double object_z_max = 2.8;
    double backdrop_z_min = 3.0;
    double backdrop_z_max = 3.9;
    double backdrop_tilt_max = 0.15;  // radians
};

// parametric stand-in for a real capture: axial Gaussian noise growing with
// depth, sub-pixel lateral jitter, dropout near depth edges, quantization
struct NoiseOracleParams {
    double axial_a = 0.003;        // meters
    double axial_b = 0.0025;       // meters^-1 (sigma_z = a + b z^2)
    double lateral_sigma_px = 0.5;
    int edge_band_px = 2;
    double edge_dropout_p = 0.4;
    double quant_step = 0.002;     // meters
    double edge_depth_thresh = 0.1;

    void validate() const {
        check(axial_a >= 0 && axial_b >= 0, "oracle: axial coefficients must be >= 0");
        check(lateral_sigma_px >= 0, "oracle: jitter std must be >= 0");
        check(edge_band_px >= 0, "oracle: edge band must be >= 0");
        check(edge_dropout_p >= 0 && edge_dropout_p <= 1, "oracle: dropout probability in [0,1]");
        check(quant_step >= 0, "oracle: quantization step must be >= 0");
    }

    double sigma_z(double z) const { return axial_a + axial_b * z * z; }

    bool all_zero() const {
        return axial_a == 0 && axial_b == 0 && lateral_sigma_px == 0 &&
               (edge_band_px == 0 || edge_dropout_p == 0) && quant_step == 0;
    }
};

// aligned (synthetic, oracle-real, residual) triple for one view
struct SimulationSample {
    DepthMap synthetic;   // S
    DepthMap real;        // R
    DepthMap residual;    // R - S on the intersected mask
    int scene_id = 0;
    int view_id = 0;
};

struct Dataset {
    std::vector<SimulationSample> samples;
    NoiseOracleParams oracle;
    std::vector<int> train_idx, val_idx;
    uint64_t seed = 0;
};

struct DatasetStats {
    double mean_validity = 0;
    double residual_p999 = 0;  // 99.9th percentile of |residual|
    double residual_max = 0;
};

Scene random_scene(uint64_t seed, const SceneLayoutParams& layout = {});

DepthMap render_depth(const Scene& scene, const Intrinsics& K, const Pose& cam_to_world,
                      int width, int height);

// brute-force ray-march intersection for one pixel; the oracle for
// render_depth (forward marching plus bisection refinement)
double ray_march_depth(const Scene& scene, const Intrinsics& K, const Pose& cam_to_world,
                       double u, double v, double t_max = 20.0, double step = 1e-3);

DepthMap apply_oracle_noise(const DepthMap& synthetic, const NoiseOracleParams& params,
                            uint64_t seed);

// pixels within band_px (Chebyshev) of a depth discontinuity or mask border
std::vector<uint8_t> edge_band_mask(const DepthMap& map, int band_px, double depth_thresh);

Dataset make_dataset(int n_scenes, int views_per_scene, const NoiseOracleParams& params,
                     uint64_t seed, int resolution = 64,
                     const SceneLayoutParams& layout = {});

DatasetStats dataset_stats(const Dataset& ds);

// residual = real - synthetic on the intersection of both masks
DepthMap residual_map(const DepthMap& synthetic, const DepthMap& real);

Pose orbit_pose(uint64_t seed, uint64_t view, const Vec3& target, double radius);

}  // namespace ss2r
