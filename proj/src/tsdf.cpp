#include "ss2r/tsdf.hpp"

#include <algorithm>
#include <cmath>

namespace ss2r {

TsdfGrid fuse_depths(const std::vector<DepthMap>& maps, const TsdfConfig& config) {
    check(!maps.empty(), "fuse: need at least one depth map");
    check(config.resolution >= 2, "fuse: resolution must be >= 2");

    TsdfGrid grid;
    grid.resolution = config.resolution;
    if (config.auto_fit) {
        Vec3 lo{1e30, 1e30, 1e30}, hi{-1e30, -1e30, -1e30};
        int64_t n_pts = 0;
        for (const DepthMap& m : maps) {
            PointCloud c = unproject(m);
            n_pts += c.size();
            for (const Vec3& p : c.pts) {
                lo.x = std::min(lo.x, p.x);
                lo.y = std::min(lo.y, p.y);
                lo.z = std::min(lo.z, p.z);
                hi.x = std::max(hi.x, p.x);
                hi.y = std::max(hi.y, p.y);
                hi.z = std::max(hi.z, p.z);
            }
        }
        check(n_pts > 0, "fuse: no valid depth samples");
        double extent = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z, 1e-6});
        double pad = extent * 0.05;
        grid.voxel_size = (extent + 2 * pad) / config.resolution;
        Vec3 center = (lo + hi) * 0.5;
        double half = 0.5 * config.resolution * grid.voxel_size;
        grid.origin = {center.x - half, center.y - half, center.z - half};
    } else {
        check(config.voxel_size > 0, "fuse: explicit config needs voxel_size");
        grid.voxel_size = config.voxel_size;
        grid.origin = config.origin;
    }
    grid.trunc = config.trunc_voxels * grid.voxel_size;

    int R = grid.resolution;
    int64_t n_vox = static_cast<int64_t>(R) * R * R;
    grid.sdf.assign(n_vox, 0.0f);
    grid.weight.assign(n_vox, 0.0f);

    // per-voxel gather; observations are sorted before summing so the result
    // is independent of the input map ordering
    parallel_for(n_vox, 4096, [&](int64_t lo_i, int64_t hi_i) {
        std::vector<double> obs;
        for (int64_t i = lo_i; i < hi_i; ++i) {
            int ix = static_cast<int>(i % R);
            int iy = static_cast<int>((i / R) % R);
            int iz = static_cast<int>(i / (static_cast<int64_t>(R) * R));
            Vec3 c = grid.voxel_center(ix, iy, iz);
            obs.clear();
            for (const DepthMap& m : maps) {
                double u, v, z;
                if (!project(m, c, u, v, z)) continue;
                int ui = static_cast<int>(std::lround(u));
                int vi = static_cast<int>(std::lround(v));
                if (ui < 0 || ui >= m.width || vi < 0 || vi >= m.height) continue;
                if (!m.is_valid(ui, vi)) continue;
                double sd = static_cast<double>(m.at(ui, vi)) - z;
                if (sd < -grid.trunc) continue;  // occluded beyond truncation
                obs.push_back(std::min(sd, grid.trunc));
            }
            if (obs.empty()) continue;
            std::sort(obs.begin(), obs.end());
            double s = 0;
            for (double o : obs) s += o;
            grid.sdf[i] = static_cast<float>(s / static_cast<double>(obs.size()));
            grid.weight[i] = static_cast<float>(obs.size());
        }
    });
    return grid;
}

PointCloud extract_points(const TsdfGrid& grid) {
    PointCloud cloud;
    int R = grid.resolution;
    auto crossing = [&](int64_t i, int64_t j, const Vec3& ci, const Vec3& cj) {
        if (grid.weight[i] <= 0 || grid.weight[j] <= 0) return;
        double a = grid.sdf[i], b = grid.sdf[j];
        if (!((a < 0 && b > 0) || (a > 0 && b < 0))) return;
        double t = a / (a - b);
        cloud.pts.push_back(ci + (cj - ci) * t);
    };
    for (int iz = 0; iz < R; ++iz)
        for (int iy = 0; iy < R; ++iy)
            for (int ix = 0; ix < R; ++ix) {
                int64_t i = grid.index(ix, iy, iz);
                Vec3 c = grid.voxel_center(ix, iy, iz);
                if (ix + 1 < R)
                    crossing(i, grid.index(ix + 1, iy, iz), c, grid.voxel_center(ix + 1, iy, iz));
                if (iy + 1 < R)
                    crossing(i, grid.index(ix, iy + 1, iz), c, grid.voxel_center(ix, iy + 1, iz));
                if (iz + 1 < R)
                    crossing(i, grid.index(ix, iy, iz + 1), c, grid.voxel_center(ix, iy, iz + 1));
            }
    return cloud;
}

}  // namespace ss2r
