#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vdst {

// 8-bit image, rows top to bottom, pixels left to right, channels interleaved
struct ImageU8 {
    int width = 0;
    int height = 0;
    int channels = 0;  // 1 (gray) or 3 (rgb)
    std::vector<uint8_t> pixels;

    uint8_t& at(int x, int y, int c) {
        return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    uint8_t at(int x, int y, int c) const {
        return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
    }
};

ImageU8 read_png(const std::string& path);
void write_png(const std::string& path, const ImageU8& img);

} // namespace vdst
