#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hardpatch/image.hpp"
#include "hardpatch/mask.hpp"

namespace hardpatch {

// 8-bit gray or RGB PNG <-> float [0,1] images.
Image read_png(const std::string& path);
void write_png(const Image& img, const std::string& path);

// In-memory codecs for the oracle wire protocol.
std::vector<uint8_t> encode_png(const Image& img);
Image decode_png(const uint8_t* data, size_t len);

// Masks travel as 1-bit grayscale PNG; on read, any nonzero pixel is set.
Grid read_grid_png(const std::string& path);
void write_grid_png(const Grid& g, const std::string& path);

std::string base64_encode(const uint8_t* data, size_t len);
std::vector<uint8_t> base64_decode(const std::string& text);

}  // namespace hardpatch
