#pragma once

#include <string>
#include <vector>

#include "ss2r/depth.hpp"

namespace ss2r {

struct PointCloud {
    std::vector<Vec3> pts;

    bool empty() const { return pts.empty(); }
    size_t size() const { return pts.size(); }
};

enum class PatchSource { real, generated };

// 3D points unprojected from one depth-map window, with the matching CAD
// window points
struct PointPatch {
    std::vector<Vec3> points;
    std::vector<Vec3> cad_points;
    PatchSource label = PatchSource::real;
    int origin_u = 0, origin_v = 0;
};

PointCloud unproject(const DepthMap& map);

// project a world point into pixel coordinates; returns false when behind
// the camera
bool project(const DepthMap& map, const Vec3& world, double& u, double& v, double& z);

std::vector<PointPatch> split_patches(const DepthMap& d, const DepthMap& cad, int patch_px,
                                      int min_points);

// translate/scale both clouds by b's bounding box so b fits [-0.5, 0.5]^3
void normalize_pair(PointCloud& a, PointCloud& b);

// symmetric mean squared nearest-neighbor distance, x1000
double chamfer_l2(const PointCloud& a, const PointCloud& b);

// percentage F-score at absolute distance threshold tau
double f_score(const PointCloud& a, const PointCloud& b, double tau = 0.01);

// occupancy IoU (percent) over [-0.5, 0.5]^3 at the given grid resolution
double voxel_iou(const PointCloud& a, const PointCloud& b, int resolution = 32);

// brute-force oracles (quadratic); the correctness reference for the
// grid-accelerated implementations
double chamfer_l2_bruteforce(const PointCloud& a, const PointCloud& b);
double f_score_bruteforce(const PointCloud& a, const PointCloud& b, double tau = 0.01);

void write_ply(const std::string& path, const PointCloud& cloud);
PointCloud read_ply(const std::string& path);

// exact nearest-neighbor queries over a uniform spatial hash grid
class PointGrid {
public:
    explicit PointGrid(const PointCloud& cloud);
    double nn_sq(const Vec3& q) const;

private:
    std::vector<Vec3> pts_;
    std::vector<int> cell_start_, cell_points_;
    Vec3 origin_;
    double cell_ = 1;
    int nx_ = 1, ny_ = 1, nz_ = 1;
    int64_t cell_index(int ix, int iy, int iz) const {
        return (static_cast<int64_t>(iz) * ny_ + iy) * nx_ + ix;
    }
};

}  // namespace ss2r
