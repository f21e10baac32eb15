#pragma once

#include "eegprompt/topomap.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace eegprompt {

// 8-bit RGB, no alpha, fixed zlib level. Identical images give identical bytes.
std::vector<std::uint8_t> encode_png(const Image& image);
// Accepts any PNG libpng can read; output is converted to 8-bit RGB.
Image decode_png(std::span<const std::uint8_t> bytes);

}  // namespace eegprompt
