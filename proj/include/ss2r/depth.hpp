#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ss2r/common.hpp"

namespace ss2r {

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        double n = norm();
        return n > 0 ? Vec3{x / n, y / n, z / n} : Vec3{0, 0, 0};
    }
};

struct Mat3 {
    // row-major
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }
    Mat3 transposed() const {
        Mat3 t;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) t.m[c * 3 + r] = m[r * 3 + c];
        return t;
    }
    static Mat3 from_columns(const Vec3& a, const Vec3& b, const Vec3& c) {
        Mat3 r;
        r.m = {a.x, b.x, c.x, a.y, b.y, c.y, a.z, b.z, c.z};
        return r;
    }
};

// rigid transform camera -> world
struct Pose {
    Mat3 R;
    Vec3 t;

    Vec3 apply(const Vec3& p) const { return R * p + t; }
    Vec3 apply_inverse(const Vec3& p) const { return R.transposed() * (p - t); }
    static Pose identity() { return {}; }

    // camera looking along +z toward target
    static Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = {0, 1, 0}) {
        Vec3 zc = (target - eye).normalized();
        Vec3 xc = up.cross(zc).normalized();
        if (xc.norm() < 1e-9) xc = Vec3{1, 0, 0};
        Vec3 yc = zc.cross(xc);
        return {Mat3::from_columns(xc, yc, zc), eye};
    }
};

struct Intrinsics {
    double fx = 64, fy = 64, cx = 32, cy = 32;
};

// H x W metric depth with validity mask, pinhole intrinsics and camera pose
struct DepthMap {
    int width = 0, height = 0;
    std::vector<float> depth;
    std::vector<uint8_t> valid;
    Intrinsics K;
    Pose cam_to_world;

    DepthMap() = default;
    DepthMap(int w, int h) : width(w), height(h), depth(w * h, 0.0f), valid(w * h, 0) {}

    float& at(int u, int v) { return depth[v * width + u]; }
    float at(int u, int v) const { return depth[v * width + u]; }
    bool is_valid(int u, int v) const { return valid[v * width + u] != 0; }
    void set(int u, int v, float z) {
        depth[v * width + u] = z;
        valid[v * width + u] = 1;
    }
    void invalidate(int u, int v) {
        depth[v * width + u] = 0.0f;
        valid[v * width + u] = 0;
    }
    int64_t valid_count() const {
        int64_t n = 0;
        for (uint8_t v : valid) n += v;
        return n;
    }
};

// PFM (little-endian grayscale) with a JSON sidecar carrying intrinsics,
// pose, validity run-lengths and free-form metadata.
void write_pfm(const std::string& path, const DepthMap& map);
DepthMap read_pfm(const std::string& path);

void write_depth_meta(const std::string& path, const DepthMap& map, const std::string& extra_json);
void read_depth_meta(const std::string& path, DepthMap& map, std::string* extra_json = nullptr);

std::vector<int64_t> mask_to_rle(const std::vector<uint8_t>& mask);
std::vector<uint8_t> rle_to_mask(const std::vector<int64_t>& rle, int64_t n);

}  // namespace ss2r
