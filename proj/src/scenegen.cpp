#include "ss2r/scenegen.hpp"

#include <algorithm>
#include <cmath>

namespace ss2r {

namespace {

constexpr double kNearPlane = 0.05;

// nearest positive ray parameter; the ray direction is unnormalized with
// d.z = 1 in the camera frame, so the parameter equals pinhole depth
double intersect(const Primitive& prim, const Vec3& origin, const Vec3& dir) {
    constexpr double kMiss = -1.0;
    if (const auto* s = std::get_if<SpherePrim>(&prim)) {
        Vec3 oc = origin - s->center;
        double a = dir.dot(dir);
        double b = 2.0 * dir.dot(oc);
        double c = oc.dot(oc) - s->radius * s->radius;
        double disc = b * b - 4 * a * c;
        if (disc < 0) return kMiss;
        double sq = std::sqrt(disc);
        double t0 = (-b - sq) / (2 * a);
        double t1 = (-b + sq) / (2 * a);
        if (t0 >= kNearPlane) return t0;
        if (t1 >= kNearPlane) return t1;
        return kMiss;
    }
    if (const auto* bx = std::get_if<BoxPrim>(&prim)) {
        double tmin = kNearPlane, tmax = 1e30;
        const double o[3] = {origin.x, origin.y, origin.z};
        const double d[3] = {dir.x, dir.y, dir.z};
        const double lo[3] = {bx->lo.x, bx->lo.y, bx->lo.z};
        const double hi[3] = {bx->hi.x, bx->hi.y, bx->hi.z};
        for (int i = 0; i < 3; ++i) {
            if (std::abs(d[i]) < 1e-12) {
                if (o[i] < lo[i] || o[i] > hi[i]) return kMiss;
                continue;
            }
            double inv = 1.0 / d[i];
            double t0 = (lo[i] - o[i]) * inv;
            double t1 = (hi[i] - o[i]) * inv;
            if (t0 > t1) std::swap(t0, t1);
            tmin = std::max(tmin, t0);
            tmax = std::min(tmax, t1);
            if (tmin > tmax) return kMiss;
        }
        return tmin;
    }
    const auto* p = std::get_if<PlanePrim>(&prim);
    double denom = p->normal.dot(dir);
    if (std::abs(denom) < 1e-12) return kMiss;
    double t = p->normal.dot(p->point - origin) / denom;
    return t >= kNearPlane ? t : kMiss;
}

bool inside(const Primitive& prim, const Vec3& q) {
    if (const auto* s = std::get_if<SpherePrim>(&prim))
        return (q - s->center).dot(q - s->center) <= s->radius * s->radius;
    if (const auto* b = std::get_if<BoxPrim>(&prim))
        return q.x >= b->lo.x && q.x <= b->hi.x && q.y >= b->lo.y && q.y <= b->hi.y &&
               q.z >= b->lo.z && q.z <= b->hi.z;
    const auto* p = std::get_if<PlanePrim>(&prim);
    return p->normal.dot(q - p->point) <= 0.0;  // halfspace behind the plane
}

Vec3 pixel_ray(const Intrinsics& K, double u, double v) {
    return {(u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0};
}

}  // namespace

Scene random_scene(uint64_t seed, const SceneLayoutParams& layout) {
    Rng rng(seed);
    RngStream rs(rng, 0);
    Scene scene;

    double zb = layout.backdrop_z_min +
                rs.uniform() * (layout.backdrop_z_max - layout.backdrop_z_min);
    double tx = (rs.uniform() * 2 - 1) * layout.backdrop_tilt_max;
    double ty = (rs.uniform() * 2 - 1) * layout.backdrop_tilt_max;
    Vec3 n = Vec3{std::sin(tx), std::sin(ty), -std::cos(tx) * std::cos(ty)}.normalized();
    scene.prims.push_back(PlanePrim{{0, 0, zb}, n});

    int n_obj = layout.min_objects +
                static_cast<int>(rs.uniform() * (layout.max_objects - layout.min_objects + 1));
    for (int i = 0; i < n_obj; ++i) {
        double z = layout.object_z_min + rs.uniform() * (layout.object_z_max - layout.object_z_min);
        double x = (rs.uniform() * 2 - 1) * 0.35 * z;
        double y = (rs.uniform() * 2 - 1) * 0.35 * z;
        if (rs.uniform() < 0.5) {
            double r = 0.12 + rs.uniform() * 0.28;
            scene.prims.push_back(SpherePrim{{x, y, z}, r});
        } else {
            Vec3 half{0.10 + rs.uniform() * 0.25, 0.10 + rs.uniform() * 0.25,
                      0.10 + rs.uniform() * 0.25};
            scene.prims.push_back(BoxPrim{{x - half.x, y - half.y, z - half.z},
                                          {x + half.x, y + half.y, z + half.z}});
        }
    }
    return scene;
}

DepthMap render_depth(const Scene& scene, const Intrinsics& K, const Pose& cam_to_world,
                      int width, int height) {
    check(K.fx > 0 && K.fy > 0, "render: invalid intrinsics");
    DepthMap map(width, height);
    map.K = K;
    map.cam_to_world = cam_to_world;
    parallel_for(height, 4, [&](int64_t lo, int64_t hi) {
        for (int64_t v = lo; v < hi; ++v) {
            for (int u = 0; u < width; ++u) {
                Vec3 dir_w = cam_to_world.R * pixel_ray(K, u, v);
                double best = -1.0;
                for (const Primitive& prim : scene.prims) {
                    double t = intersect(prim, cam_to_world.t, dir_w);
                    if (t > 0 && (best < 0 || t < best)) best = t;
                }
                if (best > 0) map.set(u, static_cast<int>(v), static_cast<float>(best));
            }
        }
    });
    return map;
}

double ray_march_depth(const Scene& scene, const Intrinsics& K, const Pose& cam_to_world,
                       double u, double v, double t_max, double step) {
    Vec3 dir_w = cam_to_world.R * pixel_ray(K, u, v);
    auto occupied = [&](double t) {
        Vec3 q = cam_to_world.t + dir_w * t;
        for (const Primitive& prim : scene.prims)
            if (inside(prim, q)) return true;
        return false;
    };
    double prev = kNearPlane;
    if (occupied(prev)) return prev;
    for (double t = kNearPlane + step; t <= t_max; t += step) {
        if (occupied(t)) {
            // bisect the bracketing interval
            double lo = prev, hi = t;
            for (int i = 0; i < 60; ++i) {
                double mid = 0.5 * (lo + hi);
                if (occupied(mid))
                    hi = mid;
                else
                    lo = mid;
            }
            return hi;
        }
        prev = t;
    }
    return -1.0;
}

std::vector<uint8_t> edge_band_mask(const DepthMap& map, int band_px, double depth_thresh) {
    int w = map.width, h = map.height;
    std::vector<uint8_t> edge(static_cast<size_t>(w) * h, 0);
    for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
            int64_t i = static_cast<int64_t>(v) * w + u;
            if (!map.valid[i]) continue;
            const int du[4] = {1, -1, 0, 0};
            const int dv[4] = {0, 0, 1, -1};
            for (int k = 0; k < 4; ++k) {
                int uu = u + du[k], vv = v + dv[k];
                if (uu < 0 || uu >= w || vv < 0 || vv >= h) continue;
                int64_t j = static_cast<int64_t>(vv) * w + uu;
                if (!map.valid[j] ||
                    std::abs(static_cast<double>(map.depth[i]) - map.depth[j]) > depth_thresh) {
                    edge[i] = 1;
                    break;
                }
            }
        }
    }
    if (band_px <= 0) return edge;
    std::vector<uint8_t> band(edge);
    for (int it = 0; it < band_px; ++it) {
        std::vector<uint8_t> next(band);
        for (int v = 0; v < h; ++v)
            for (int u = 0; u < w; ++u) {
                if (band[static_cast<int64_t>(v) * w + u]) continue;
                for (int dv2 = -1; dv2 <= 1 && !next[static_cast<int64_t>(v) * w + u]; ++dv2)
                    for (int du2 = -1; du2 <= 1; ++du2) {
                        int uu = u + du2, vv = v + dv2;
                        if (uu < 0 || uu >= w || vv < 0 || vv >= h) continue;
                        if (band[static_cast<int64_t>(vv) * w + uu]) {
                            next[static_cast<int64_t>(v) * w + u] = 1;
                            break;
                        }
                    }
            }
        band.swap(next);
    }
    return band;
}

DepthMap apply_oracle_noise(const DepthMap& synthetic, const NoiseOracleParams& params,
                            uint64_t seed) {
    params.validate();
    const int w = synthetic.width, h = synthetic.height;
    DepthMap out(w, h);
    out.K = synthetic.K;
    out.cam_to_world = synthetic.cam_to_world;
    std::vector<uint8_t> band = params.edge_dropout_p > 0
                                    ? edge_band_mask(synthetic, params.edge_band_px,
                                                     params.edge_depth_thresh)
                                    : std::vector<uint8_t>();
    Rng rng(seed);
    parallel_for(static_cast<int64_t>(w) * h, 1024, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) {
            int u = static_cast<int>(i % w), v = static_cast<int>(i / w);
            int us = u, vs = v;
            if (params.lateral_sigma_px > 0) {
                us = static_cast<int>(std::lround(u + params.lateral_sigma_px * rng.normal(i, 0)));
                vs = static_cast<int>(std::lround(v + params.lateral_sigma_px * rng.normal(i, 1)));
                us = std::clamp(us, 0, w - 1);
                vs = std::clamp(vs, 0, h - 1);
            }
            if (!synthetic.is_valid(us, vs)) continue;
            double z = synthetic.at(us, vs);
            if (us != u || vs != v) {
                // a jittered read that crosses a depth discontinuity is a
                // flying pixel; reject it as dropout
                if (!synthetic.is_valid(u, v)) continue;
                if (std::abs(z - synthetic.at(u, v)) > params.edge_depth_thresh) continue;
            }
            double sz = params.sigma_z(z);
            if (sz > 0) z += sz * rng.normal(i, 2);
            if (!band.empty() && band[i] && rng.uniform(i, 3) < params.edge_dropout_p) continue;
            if (params.quant_step > 0)
                z = static_cast<double>(std::llround(z / params.quant_step)) * params.quant_step;
            if (z <= 0) continue;
            out.set(u, v, static_cast<float>(z));
        }
    });
    return out;
}

DepthMap residual_map(const DepthMap& synthetic, const DepthMap& real) {
    check(synthetic.width == real.width && synthetic.height == real.height,
          "residual: dimension mismatch");
    DepthMap res(synthetic.width, synthetic.height);
    res.K = synthetic.K;
    res.cam_to_world = synthetic.cam_to_world;
    for (int64_t i = 0; i < static_cast<int64_t>(res.depth.size()); ++i) {
        if (synthetic.valid[i] && real.valid[i]) {
            res.depth[i] = real.depth[i] - synthetic.depth[i];
            res.valid[i] = 1;
        }
    }
    return res;
}

Pose orbit_pose(uint64_t seed, uint64_t view, const Vec3& target, double radius) {
    Rng rng(seed);
    double yaw = (rng.uniform(10, view) * 2 - 1) * 0.45;
    double pitch = (rng.uniform(11, view) * 2 - 1) * 0.26;
    Vec3 eye{target.x + radius * std::sin(yaw) * std::cos(pitch),
             target.y + radius * std::sin(pitch),
             target.z - radius * std::cos(yaw) * std::cos(pitch)};
    return Pose::look_at(eye, target);
}

Dataset make_dataset(int n_scenes, int views_per_scene, const NoiseOracleParams& params,
                     uint64_t seed, int resolution, const SceneLayoutParams& layout) {
    check(n_scenes >= 1, "dataset: need at least one scene");
    check(views_per_scene >= 1, "dataset: need at least one view");
    params.validate();
    Dataset ds;
    ds.oracle = params;
    ds.seed = seed;
    Rng rng(seed);
    Intrinsics K{static_cast<double>(resolution), static_cast<double>(resolution),
                 resolution / 2.0, resolution / 2.0};
    ds.samples.resize(static_cast<size_t>(n_scenes) * views_per_scene);
    parallel_for(n_scenes, 1, [&](int64_t lo, int64_t hi) {
        for (int64_t sc = lo; sc < hi; ++sc) {
            Scene scene = random_scene(rng.derive(1, sc), layout);
            for (int view = 0; view < views_per_scene; ++view) {
                Pose pose = view == 0 ? Pose::identity()
                                      : orbit_pose(rng.derive(2, sc), view, {0, 0, 2.0}, 2.0);
                SimulationSample& s = ds.samples[sc * views_per_scene + view];
                s.scene_id = static_cast<int>(sc);
                s.view_id = view;
                s.synthetic = render_depth(scene, K, pose, resolution, resolution);
                s.real = apply_oracle_noise(s.synthetic, params,
                                            rng.derive(3, sc * 1024 + view));
                s.residual = residual_map(s.synthetic, s.real);
            }
        }
    });
    for (int sc = 0; sc < n_scenes; ++sc) {
        auto& idx = (sc % 10 == 9) ? ds.val_idx : ds.train_idx;
        for (int view = 0; view < views_per_scene; ++view)
            idx.push_back(sc * views_per_scene + view);
    }
    return ds;
}

DatasetStats dataset_stats(const Dataset& ds) {
    DatasetStats st;
    double validity = 0;
    std::vector<float> abs_res;
    for (const SimulationSample& s : ds.samples) {
        validity += static_cast<double>(s.synthetic.valid_count()) / s.synthetic.depth.size();
        for (int64_t i = 0; i < static_cast<int64_t>(s.residual.depth.size()); ++i)
            if (s.residual.valid[i]) abs_res.push_back(std::abs(s.residual.depth[i]));
    }
    st.mean_validity = validity / ds.samples.size();
    if (!abs_res.empty()) {
        std::sort(abs_res.begin(), abs_res.end());
        st.residual_p999 = abs_res[static_cast<size_t>(0.999 * (abs_res.size() - 1))];
        st.residual_max = abs_res.back();
    }
    return st;
}

}  // namespace ss2r
