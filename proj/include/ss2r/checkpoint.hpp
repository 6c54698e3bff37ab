#pragma once

#include <string>

#include "ss2r/params.hpp"

namespace ss2r {

// Binary tensor checkpoint: 8-byte magic "SS2RTENS", u32 record count, then
// per record a u32-length-prefixed name followed by u32 rank, u32 dims and
// the row-major f32 payload. All integers little-endian.
void save_checkpoint(const std::string& path, const ParamStore<float>& params);
ParamStore<float> load_checkpoint(const std::string& path);

}  // namespace ss2r
