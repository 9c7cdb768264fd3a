#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bmmp {

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major
};

// Binary PGM (P5, maxval 255). Throws std::runtime_error on any other
// format or on malformed input.
GrayImage read_pgm(const std::string& path);
void write_pgm(const std::string& path, const GrayImage& image);

}  // namespace bmmp
