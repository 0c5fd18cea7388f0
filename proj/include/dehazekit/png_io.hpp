#pragma once

#include <string>

#include "dehazekit/image.hpp"

namespace dhz {

// Lossless 8-bit RGB PNG only. Values are scaled by 1/255 on load; a
// save -> load round trip reproduces the 8-bit-quantized values exactly.
Image load_image(const std::string& path);
void save_image(const Image& img, const std::string& path);

} // namespace dhz
