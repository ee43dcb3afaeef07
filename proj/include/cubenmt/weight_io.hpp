#pragma once

#include <string>

#include "cubenmt/model.hpp"

namespace cubenmt {

// Weight container: a plain-text manifest (format version, dimensions, one
// record per tensor with name, shape and byte offset) followed by the raw
// little-endian 32-bit payload in manifest order. Round-trips bitwise.
void save_weights(const ModelParams& params, const std::string& path);
ModelParams load_weights(const std::string& path);

}  // namespace cubenmt
