#pragma once

#include <map>
#include <string>

#include "lowlight/tensor.hpp"

namespace lowlight {

// Parameter archive: 8-byte magic "LOWLCKPT", version u32, then one record
// per entry in name order — name length u32, name bytes, rank u32, extents
// u64 each, row-major little-endian f64 payload. Round-trips bit-exactly.
using ParamMap = std::map<std::string, Tensor>;

void save_checkpoint(const std::string& path, const ParamMap& params);
ParamMap load_checkpoint(const std::string& path);

}  // namespace lowlight
