#pragma once

#include <vector>

#include "ss2r/geometry.hpp"

namespace ss2r {

struct TsdfConfig {
    int resolution = 64;
    double voxel_size = 0;   // derived from the fitted box when 0
    Vec3 origin;             // min corner
    double trunc_voxels = 3; // truncation distance in voxel units
    bool auto_fit = true;    // fit origin/voxel_size to the input maps
};

// truncated signed-distance voxel grid with per-voxel observation counts
struct TsdfGrid {
    int resolution = 0;
    double voxel_size = 0;
    double trunc = 0;
    Vec3 origin;
    std::vector<float> sdf;
    std::vector<float> weight;

    Vec3 voxel_center(int ix, int iy, int iz) const {
        return {origin.x + (ix + 0.5) * voxel_size, origin.y + (iy + 0.5) * voxel_size,
                origin.z + (iz + 0.5) * voxel_size};
    }
    int64_t index(int ix, int iy, int iz) const {
        return (static_cast<int64_t>(iz) * resolution + iy) * resolution + ix;
    }
};

TsdfGrid fuse_depths(const std::vector<DepthMap>& maps, const TsdfConfig& config);

// surface points at sign changes between adjacent voxel centers
PointCloud extract_points(const TsdfGrid& grid);

}  // namespace ss2r
