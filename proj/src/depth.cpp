#include "ss2r/depth.hpp"

#include <fstream>

#include <json.hpp>

namespace ss2r {

void write_pfm(const std::string& path, const DepthMap& map) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("pfm: cannot open " + path + " for writing");
    os << "Pf\n" << map.width << " " << map.height << "\n-1.0\n";
    // PFM stores rows bottom-up
    for (int v = map.height - 1; v >= 0; --v)
        os.write(reinterpret_cast<const char*>(map.depth.data() + v * map.width),
                 static_cast<std::streamsize>(map.width * sizeof(float)));
    if (!os) throw std::runtime_error("pfm: write failed for " + path);
}

DepthMap read_pfm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("pfm: cannot open " + path);
    std::string magic;
    is >> magic;
    if (magic != "Pf") throw std::runtime_error("pfm: " + path + " is not a grayscale PFM");
    int w = 0, h = 0;
    double scale = 0;
    is >> w >> h >> scale;
    is.get();  // newline before payload
    if (w <= 0 || h <= 0) throw std::runtime_error("pfm: bad dimensions in " + path);
    if (scale >= 0) throw std::runtime_error("pfm: big-endian files unsupported: " + path);
    DepthMap map(w, h);
    for (int v = h - 1; v >= 0; --v)
        is.read(reinterpret_cast<char*>(map.depth.data() + v * w),
                static_cast<std::streamsize>(w * sizeof(float)));
    if (!is) throw std::runtime_error("pfm: truncated payload in " + path);
    for (int64_t i = 0; i < static_cast<int64_t>(map.depth.size()); ++i)
        map.valid[i] = map.depth[i] > 0.0f ? 1 : 0;
    return map;
}

std::vector<int64_t> mask_to_rle(const std::vector<uint8_t>& mask) {
    // alternating run lengths, first run counts valid pixels (may be zero)
    std::vector<int64_t> rle;
    uint8_t cur = 1;
    int64_t run = 0;
    for (uint8_t m : mask) {
        uint8_t bit = m ? 1 : 0;
        if (bit == cur) {
            ++run;
        } else {
            rle.push_back(run);
            cur = bit;
            run = 1;
        }
    }
    rle.push_back(run);
    return rle;
}

std::vector<uint8_t> rle_to_mask(const std::vector<int64_t>& rle, int64_t n) {
    std::vector<uint8_t> mask;
    mask.reserve(n);
    uint8_t cur = 1;
    for (int64_t run : rle) {
        check(run >= 0, "rle: negative run");
        for (int64_t i = 0; i < run; ++i) mask.push_back(cur);
        cur = 1 - cur;
    }
    check(static_cast<int64_t>(mask.size()) == n, "rle: run lengths do not cover the mask");
    return mask;
}

void write_depth_meta(const std::string& path, const DepthMap& map,
                      const std::string& extra_json) {
    nlohmann::json j;
    j["width"] = map.width;
    j["height"] = map.height;
    j["fx"] = map.K.fx;
    j["fy"] = map.K.fy;
    j["cx"] = map.K.cx;
    j["cy"] = map.K.cy;
    j["pose_r"] = map.cam_to_world.R.m;
    j["pose_t"] = {map.cam_to_world.t.x, map.cam_to_world.t.y, map.cam_to_world.t.z};
    j["mask_rle"] = mask_to_rle(map.valid);
    if (!extra_json.empty()) j["extra"] = nlohmann::json::parse(extra_json);
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("meta: cannot open " + path + " for writing");
    os << j.dump(2) << "\n";
}

void read_depth_meta(const std::string& path, DepthMap& map, std::string* extra_json) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("meta: cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(is);
    check(j.at("width").get<int>() == map.width && j.at("height").get<int>() == map.height,
          "meta: dimensions do not match the depth payload");
    map.K.fx = j.at("fx").get<double>();
    map.K.fy = j.at("fy").get<double>();
    map.K.cx = j.at("cx").get<double>();
    map.K.cy = j.at("cy").get<double>();
    map.cam_to_world.R.m = j.at("pose_r").get<std::array<double, 9>>();
    auto t = j.at("pose_t").get<std::array<double, 3>>();
    map.cam_to_world.t = {t[0], t[1], t[2]};
    map.valid = rle_to_mask(j.at("mask_rle").get<std::vector<int64_t>>(),
                            static_cast<int64_t>(map.width) * map.height);
    for (int64_t i = 0; i < static_cast<int64_t>(map.valid.size()); ++i)
        if (!map.valid[i]) map.depth[i] = 0.0f;
    if (extra_json) *extra_json = j.contains("extra") ? j["extra"].dump() : std::string();
}

}  // namespace ss2r
